use serde::{Deserialize, Serialize};

/// Monte-Carlo estimate of an expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl MCEstimate {
    /// Sample mean and standard error `s / sqrt(n)` of per-path values.
    ///
    /// Reduction is sequential in slice order, so the result depends only on
    /// the values and not on how they were produced.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n_paths: 0,
            };
        }
        let mean = compensated_sum(samples.iter().copied()) / n as f64;
        let std_error = if n > 1 {
            let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            n_paths: n,
        }
    }

    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            n_paths: 0,
        }
    }

    /// `|self − other|` in units of the combined standard error.
    pub fn z_score(&self, other: &MCEstimate) -> f64 {
        let se = self.std_error.hypot(other.std_error);
        let diff = (self.mean - other.mean).abs();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

/// Neumaier summation; keeps long path averages accurate to a few ulps.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample variance of `samples` together with the standard error of that
/// variance estimate, `sqrt((m4 − s⁴) / n)`.
pub fn variance_estimate(samples: &[f64]) -> MCEstimate {
    let n = samples.len();
    if n < 2 {
        return MCEstimate {
            mean: 0.0,
            std_error: 0.0,
            n_paths: n,
        };
    }
    let nf = n as f64;
    let mean = compensated_sum(samples.iter().copied()) / nf;
    let d2 = |x: &f64| (x - mean) * (x - mean);
    let m2 = compensated_sum(samples.iter().map(d2));
    let m4 = compensated_sum(samples.iter().map(|x| d2(x) * d2(x)));
    let var = m2 / (nf - 1.0);
    let m4 = m4 / nf;
    let m2b = m2 / nf;
    let se = ((m4 - m2b * m2b).max(0.0) / nf).sqrt();
    MCEstimate {
        mean: var,
        std_error: se,
        n_paths: n,
    }
}
