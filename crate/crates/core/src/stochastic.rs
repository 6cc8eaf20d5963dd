//! Exact joint sampling of the two Ornstein–Uhlenbeck factors and their
//! running integrals.
//!
//! Over a step of length `h` the vector `(Δχ₁, Δχ₂, ΔY₁, ΔY₂)` is Gaussian
//! given the current state, with mean `((e^{−aᵢh} − 1)χᵢ, Bᵢ(h)χᵢ)` and the
//! covariance returned by [`joint_increment_covariance`]. Paths are stepped
//! with that law, so the grid only controls where the state is observed.
//!
//! Every path draws from its own ChaCha8 stream selected by the path index,
//! which makes the output independent of scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveState, G2ppParams};
use crate::error::{invalid, Result};
use crate::linalg::cholesky_psd;

/// Uniform grid `t_j = j · horizon / n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    times: Vec<f64>,
}

impl TimeGrid {
    /// Grid on `[0, horizon]`; the unit interval is the common case, longer
    /// horizons are used to sample discount factors to a maturity.
    pub fn with_horizon(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(invalid("n_steps", "at least one step is required"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", "horizon must be positive"));
        }
        let times = (0..=n_steps)
            .map(|j| {
                if j == n_steps {
                    horizon
                } else {
                    horizon * j as f64 / n_steps as f64
                }
            })
            .collect();
        Ok(Self { n_steps, times })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        self.horizon() / self.n_steps as f64
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.n_steps]
    }

    /// Index of `t` on the grid, if it is a node (to 1e-12).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let j = (t / self.dt()).round();
        if j < 0.0 || j > self.n_steps as f64 {
            return None;
        }
        let j = j as usize;
        ((self.times[j] - t).abs() <= 1e-12).then_some(j)
    }
}

/// Uniform grid on the unit interval.
pub fn make_time_grid(n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::with_horizon(n_steps, 1.0)
}

/// Seed and path count. Path `i` draws from stream `i` of a ChaCha8
/// generator keyed by `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomPlan {
    pub seed: u64,
    pub n_paths: usize,
}

impl RandomPlan {
    pub fn new(seed: u64, n_paths: usize) -> Result<Self> {
        if n_paths == 0 {
            return Err(invalid("n_paths", "at least one path is required"));
        }
        Ok(Self { seed, n_paths })
    }

    pub fn path_rng(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        rng
    }
}

/// One exact step of an Ornstein–Uhlenbeck process with zero mean level.
pub fn ou_step(chi: f64, a: f64, sigma: f64, dt: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(invalid("a", "mean reversion must be positive"));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "step must be positive"));
    }
    if sigma < 0.0 {
        return Err(invalid("sigma", "volatility must be non-negative"));
    }
    let sd = sigma * kernels::decay_integral(2.0 * a, dt).sqrt();
    Ok(chi * (-a * dt).exp() + sd * z)
}

/// Conditional covariance of `(Δχ₁, Δχ₂, ΔY₁, ΔY₂)` over a step `dt`,
/// where `Yᵢ(t) = ∫₀ᵗ χᵢ ds`.
pub fn joint_increment_covariance(params: &G2ppParams, dt: f64) -> Result<[[f64; 4]; 4]> {
    if !(dt > 0.0) {
        return Err(invalid("dt", "step must be positive"));
    }
    crate::curve::check_rho(params.rho)?;
    if params.a1 <= 0.0 || params.a2 <= 0.0 {
        return Err(invalid("a", "mean reversion must be positive"));
    }
    let mut c = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            let k = params.sigma(i) * params.sigma(j) * params.corr(i, j);
            let (ai, aj) = (params.a(i), params.a(j));
            c[i][j] = k * kernels::decay_integral(ai + aj, dt);
            // Cov(χᵢ noise, Yⱼ noise)
            c[i][2 + j] = k * kernels::xz(ai, aj, dt);
            c[2 + j][i] = c[i][2 + j];
            c[2 + i][2 + j] = k * kernels::zz(ai, aj, dt);
        }
    }
    Ok(c)
}

/// Realized factor paths on a grid. Values are stored path-major as
/// `(χ₁, χ₂, Y₁, Y₂)` per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPathSet {
    params: G2ppParams,
    grid: TimeGrid,
    plan: RandomPlan,
    data: Vec<f64>,
}

impl FactorPathSet {
    pub fn params(&self) -> &G2ppParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn plan(&self) -> &RandomPlan {
        &self.plan
    }

    pub fn n_paths(&self) -> usize {
        self.plan.n_paths
    }

    #[inline]
    fn offset(&self, path: usize, j: usize) -> usize {
        (path * (self.grid.n_steps + 1) + j) * 4
    }

    #[inline]
    pub fn chi1(&self, path: usize, j: usize) -> f64 {
        self.data[self.offset(path, j)]
    }

    #[inline]
    pub fn chi2(&self, path: usize, j: usize) -> f64 {
        self.data[self.offset(path, j) + 1]
    }

    #[inline]
    pub fn y1(&self, path: usize, j: usize) -> f64 {
        self.data[self.offset(path, j) + 2]
    }

    #[inline]
    pub fn y2(&self, path: usize, j: usize) -> f64 {
        self.data[self.offset(path, j) + 3]
    }

    #[inline]
    pub fn state(&self, path: usize, j: usize) -> CurveState {
        let o = self.offset(path, j);
        CurveState {
            t: self.grid.times[j],
            chi1: self.data[o],
            chi2: self.data[o + 1],
            y1: self.data[o + 2],
            y2: self.data[o + 3],
        }
    }
}

/// Exact stepping of all paths. Output is bit-identical for identical
/// inputs whatever the rayon pool size.
pub fn simulate(params: &G2ppParams, grid: &TimeGrid, plan: &RandomPlan) -> Result<FactorPathSet> {
    params.validate()?;
    if plan.n_paths == 0 {
        return Err(invalid("n_paths", "at least one path is required"));
    }
    let dt = grid.dt();
    let cov = joint_increment_covariance(params, dt)?;
    let flat: Vec<f64> = cov.iter().flatten().copied().collect();
    let l = cholesky_psd(&flat, 4);
    let decay = [(-params.a1 * dt).exp(), (-params.a2 * dt).exp()];
    let bfac = [
        kernels::decay_integral(params.a1, dt),
        kernels::decay_integral(params.a2, dt),
    ];
    let stride = (grid.n_steps + 1) * 4;
    let mut data = vec![0.0; stride * plan.n_paths];
    data.par_chunks_mut(stride)
        .enumerate()
        .for_each(|(path, out)| {
            let mut rng = plan.path_rng(path);
            let mut x = [params.chi10, params.chi20, 0.0, 0.0];
            out[..4].copy_from_slice(&x);
            for j in 1..=grid.n_steps {
                let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let mut noise = [0.0; 4];
                for (r, n) in noise.iter_mut().enumerate() {
                    *n = (0..=r).map(|k| l[r * 4 + k] * z[k]).sum();
                }
                let next = [
                    x[0] * decay[0] + noise[0],
                    x[1] * decay[1] + noise[1],
                    x[2] + x[0] * bfac[0] + noise[2],
                    x[3] + x[1] * bfac[1] + noise[3],
                ];
                x = next;
                out[j * 4..j * 4 + 4].copy_from_slice(&x);
            }
        });
    Ok(FactorPathSet {
        params: *params,
        grid: grid.clone(),
        plan: *plan,
        data,
    })
}

/// Integrals of exponential kernels over `[0, h]`, evaluated stably for
/// small `a·h`.
pub(crate) mod kernels {
    const SERIES_TERMS: usize = 40;

    /// `∫₀ʰ e^{−ks} ds = (1 − e^{−kh}) / k`.
    #[inline]
    pub fn decay_integral(k: f64, h: f64) -> f64 {
        if k == 0.0 {
            h
        } else {
            -(-k * h).exp_m1() / k
        }
    }

    fn use_series(ai: f64, aj: f64, h: f64) -> bool {
        (ai + aj) * h <= 1.0
    }

    /// `∫₀ʰ e^{−aᵢs} (1 − e^{−aⱼs}) / aⱼ ds`.
    ///
    /// Series: `Σ_{n≥2} (−h)ⁿ/n! · Hₙ₋₁(aᵢ)` where
    /// `Hₘ(a) = ((a + aⱼ)ᵐ − aᵐ) / aⱼ` is built from positive terms.
    pub fn xz(ai: f64, aj: f64, h: f64) -> f64 {
        if !use_series(ai, aj, h) {
            return (decay_integral(ai, h) - decay_integral(ai + aj, h)) / aj;
        }
        let s = ai + aj;
        let (mut hm, mut pow) = (1.0, 1.0);
        let mut fact = 0.5 * h * h;
        let mut sum = fact;
        for n in 3..=SERIES_TERMS {
            pow *= ai;
            hm = s * hm + pow;
            fact *= -h / n as f64;
            let term = fact * hm;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    }

    /// `∫₀ʰ (1 − e^{−aᵢs})(1 − e^{−aⱼs}) / (aᵢaⱼ) ds`.
    ///
    /// Series: `Σ_{n≥3} −(−h)ⁿ/n! · (Hₙ₋₂(aᵢ) + Hₙ₋₂(aⱼ))` with `Hₘ` as in
    /// [`xz`] taken over `s = aᵢ + aⱼ`.
    pub fn zz(ai: f64, aj: f64, h: f64) -> f64 {
        if !use_series(ai, aj, h) {
            return (h - decay_integral(ai, h) - decay_integral(aj, h)
                + decay_integral(ai + aj, h))
                / (ai * aj);
        }
        let s = ai + aj;
        let (mut hi, mut hj, mut pi, mut pj) = (1.0, 1.0, 1.0, 1.0);
        let mut fact = h * h * h / 6.0;
        let mut sum = 2.0 * fact;
        for n in 4..=SERIES_TERMS {
            pi *= ai;
            pj *= aj;
            hi = s * hi + pi;
            hj = s * hj + pj;
            fact *= -h / n as f64;
            let term = fact * (hi + hj);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        assert_eq!(make_time_grid(1).unwrap().times(), &[0.0, 1.0]);
        assert_eq!(
            make_time_grid(4).unwrap().times(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(make_time_grid(0).is_err());
        let g = make_time_grid(100).unwrap();
        assert_eq!(g.index_of(0.5), Some(50));
        assert_eq!(g.index_of(0.505), None);
        assert_eq!(g.index_of(1.0), Some(100));
    }

    #[test]
    fn ou_step_examples() {
        let v = ou_step(1.0, 0.1, 0.0, 1.0, 3.0).unwrap();
        assert!((v - (-0.1f64).exp()).abs() < 1e-15);
        assert_eq!(ou_step(0.0, 0.4, 0.2, 0.5, 0.0).unwrap(), 0.0);
        assert!(ou_step(1.0, 0.0, 0.1, 1.0, 0.0).is_err());
        assert!(ou_step(1.0, 0.1, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn covariance_independent_factors() {
        let p = G2ppParams {
            rho: 0.0,
            ..G2ppParams::default()
        };
        let c = joint_increment_covariance(&p, 0.1).unwrap();
        for &(i, j) in &[(0, 1), (0, 3), (1, 2), (2, 3)] {
            assert_eq!(c[i][j], 0.0);
            assert_eq!(c[j][i], 0.0);
        }
    }

    #[test]
    fn covariance_variance_entry() {
        let p = G2ppParams::default();
        let c = joint_increment_covariance(&p, 0.01).unwrap();
        let expect = p.s1 * p.s1 * (1.0 - (-2.0 * p.a1 * 0.01f64).exp()) / (2.0 * p.a1);
        assert!(((c[0][0] - expect) / expect).abs() < 1e-13);
        let bad = G2ppParams {
            rho: 1.0,
            ..G2ppParams::default()
        };
        assert!(joint_increment_covariance(&bad, 0.01).is_err());
        assert!(joint_increment_covariance(&p, 0.0).is_err());
    }

    #[test]
    fn deterministic_limit() {
        let p = G2ppParams {
            s1: 0.0,
            s2: 0.0,
            chi10: 0.02,
            chi20: -0.01,
            ..G2ppParams::default()
        };
        let grid = make_time_grid(20).unwrap();
        let set = simulate(&p, &grid, &RandomPlan::new(7, 5).unwrap()).unwrap();
        for path in 0..5 {
            for (j, &t) in grid.times().iter().enumerate() {
                let c1 = p.chi10 * (-p.a1 * t).exp();
                let y2 = p.chi20 * (1.0 - (-p.a2 * t).exp()) / p.a2;
                assert!((set.chi1(path, j) - c1).abs() < 1e-15);
                assert!((set.y2(path, j) - y2).abs() < 1e-15);
                assert_eq!(set.chi1(path, j), set.chi1(0, j));
            }
        }
    }

    #[test]
    fn initial_values_on_every_path() {
        let p = G2ppParams {
            chi10: 0.01,
            ..G2ppParams::default()
        };
        let set = simulate(
            &p,
            &make_time_grid(3).unwrap(),
            &RandomPlan::new(1, 50).unwrap(),
        )
        .unwrap();
        for path in 0..50 {
            assert_eq!(set.chi1(path, 0), 0.01);
            assert_eq!(set.chi2(path, 0), 0.0);
            assert_eq!(set.y1(path, 0), 0.0);
            assert_eq!(set.y2(path, 0), 0.0);
        }
    }

    #[test]
    fn reproducible_and_pool_independent() {
        let p = G2ppParams::default();
        let grid = make_time_grid(10).unwrap();
        let plan = RandomPlan::new(42, 300).unwrap();
        let a = simulate(&p, &grid, &plan).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| simulate(&p, &grid, &plan).unwrap());
        assert_eq!(a, b);
        // path i is the same whether or not other paths are simulated
        let small = simulate(&p, &grid, &RandomPlan::new(42, 7).unwrap()).unwrap();
        for j in 0..=10 {
            assert_eq!(small.state(6, j), a.state(6, j));
        }
    }
}
