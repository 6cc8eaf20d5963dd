//! Multi-bond static hedge as a quadratic program.
//!
//! For a basis of zero bonds `T₁..Tₙ` the risk of the position `Σ βᵢ δ_{Tᵢ}`
//! is `F(β) = βᵀAβ − 2Bᵀβ + C`, with
//!
//! ```text
//! Aᵢⱼ = E ∫ ⟨σ(Tᵢ), σ(Tⱼ)⟩_H (1 − t) dt
//! Bᵢ  = E ∫ ⟨σ_exposure, σ(Tᵢ)⟩_H (1 − t) dt
//! C   = E ∫ ‖σ_exposure‖²_H (1 − t) dt
//! ```
//!
//! and the optimum solves `Aβ = B`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{h_inner_unchecked, G2ppParams, LoadingTable, VolLoading};
use crate::error::{invalid, Error, Result};
use crate::linalg::Cholesky;
use crate::quadrature::time_weights;
use crate::risk::BondPortfolio;
use crate::stochastic::FactorPathSet;

const BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    /// Row-major `n × n`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub basis: Vec<f64>,
}

impl QuadraticForm {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn a_entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.a_entry(i, i)).sum()
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        if self.a.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: self.a.len(),
            });
        }
        if self.b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.b.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadSolution {
    pub beta: Vec<f64>,
    pub value: f64,
    /// Ratio of the extreme squared Cholesky pivots.
    pub condition_estimate: f64,
    /// The fallback ridge was needed.
    pub regularized: bool,
    pub ridge: f64,
}

/// Accumulates `A`, `B`, `C` from one pass over the paths. Per-block sums
/// are combined in block order.
pub fn assemble(
    curve: &G2ppParams,
    exposure: &BondPortfolio,
    basis: &[f64],
    sim: &FactorPathSet,
) -> Result<QuadraticForm> {
    curve.validate()?;
    if sim.params() != curve {
        return Err(Error::GridMismatch(
            "paths were simulated with different model parameters".into(),
        ));
    }
    if basis.is_empty() {
        return Err(invalid("basis", "at least one maturity is required"));
    }
    for (i, &t) in basis.iter().enumerate() {
        if !(t > 1.0 && t.is_finite()) {
            return Err(Error::Maturity {
                maturity: t,
                reason: "basis maturities must exceed one year",
            });
        }
        if basis[..i].contains(&t) {
            return Err(invalid("basis", format!("duplicate maturity {t}")));
        }
    }
    let n = basis.len();
    let mut mats = basis.to_vec();
    let exp_idx: Vec<(f64, usize)> = exposure
        .entries()
        .iter()
        .map(|&(a, t)| match mats.iter().position(|&u| u == t) {
            Some(k) => (a, k),
            None => {
                mats.push(t);
                (a, mats.len() - 1)
            }
        })
        .collect();

    let times = sim.grid().times();
    let table = LoadingTable::new(curve, times, &mats);
    let tw = time_weights(times);
    let rho = curve.rho;
    let width = n * n + n + 1;
    let n_paths = sim.n_paths();
    let n_blocks = n_paths.div_ceil(BLOCK);

    let partial: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; width];
            let m = mats.len();
            let (mut v1, mut v2) = (vec![0.0; m], vec![0.0; m]);
            let mut l = vec![VolLoading::default(); n];
            for path in b * BLOCK..((b + 1) * BLOCK).min(n_paths) {
                for (j, &w) in tw.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    table.loadings(j, &sim.state(path, j), &mut v1, &mut v2);
                    for i in 0..n {
                        l[i] = VolLoading::new(v1[i], v2[i]);
                    }
                    let e = exp_idx.iter().fold(VolLoading::default(), |s, &(a, k)| {
                        s + VolLoading::new(a * v1[k], a * v2[k])
                    });
                    for i in 0..n {
                        for k in i..n {
                            acc[i * n + k] += w * h_inner_unchecked(rho, l[i], l[k]);
                        }
                        acc[n * n + i] += w * h_inner_unchecked(rho, e, l[i]);
                    }
                    acc[width - 1] += w * h_inner_unchecked(rho, e, e);
                }
            }
            acc
        })
        .collect();

    let mut total = vec![0.0; width];
    for p in &partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let inv = 1.0 / n_paths as f64;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for k in i..n {
            let v = total[i * n + k] * inv;
            a[i * n + k] = v;
            a[k * n + i] = v;
        }
    }
    let b = total[n * n..n * n + n].iter().map(|v| v * inv).collect();
    Ok(QuadraticForm {
        a,
        b,
        c: total[width - 1] * inv,
        basis: basis.to_vec(),
    })
}

/// `βᵀAβ − 2Bᵀβ + C`.
pub fn evaluate(form: &QuadraticForm, beta: &[f64]) -> Result<f64> {
    form.check()?;
    let n = form.dim();
    if beta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: beta.len(),
        });
    }
    let mut quad = 0.0;
    for i in 0..n {
        let row: f64 = (0..n).map(|k| form.a[i * n + k] * beta[k]).sum();
        quad += beta[i] * row;
    }
    let lin: f64 = form.b.iter().zip(beta).map(|(b, x)| b * x).sum();
    Ok(quad - 2.0 * lin + form.c)
}

/// Solves `(A + ridge·I) β = B`. A failed factorization is retried once
/// with ridge `1e-10 · tr(A) / n` and the result flagged.
pub fn solve(form: &QuadraticForm, ridge: f64) -> Result<QuadSolution> {
    form.check()?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(invalid("ridge", "must be non-negative"));
    }
    let n = form.dim();
    let shifted = |r: f64| {
        let mut a = form.a.clone();
        for i in 0..n {
            a[i * n + i] += r;
        }
        a
    };
    let (chol, used, regularized) = match Cholesky::factor(&shifted(ridge), n) {
        Ok(ch) => (ch, ridge, false),
        Err(_) => {
            let fallback = ridge.max(1e-10 * form.trace() / n as f64);
            if !(fallback > 0.0) {
                return Err(Error::Singular { row: 0, pivot: 0.0 });
            }
            (Cholesky::factor(&shifted(fallback), n)?, fallback, true)
        }
    };
    let beta = chol.solve(&form.b);
    let value = evaluate(form, &beta)?;
    Ok(QuadSolution {
        condition_estimate: chol.pivot_ratio(),
        beta,
        value,
        regularized,
        ridge: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(a: Vec<f64>, b: Vec<f64>, c: f64) -> QuadraticForm {
        let basis = (0..b.len()).map(|i| 2.0 + i as f64).collect();
        QuadraticForm { a, b, c, basis }
    }

    #[test]
    fn identity_system() {
        let f = form(vec![1.0, 0.0, 0.0, 1.0], vec![0.3, -0.7], 1.0);
        let s = solve(&f, 0.0).unwrap();
        assert_eq!(s.beta, vec![0.3, -0.7]);
        assert!(!s.regularized);
        assert_eq!(s.condition_estimate, 1.0);
    }

    #[test]
    fn two_by_two() {
        let f = form(vec![2.0, 1.0, 1.0, 2.0], vec![3.0, 3.0], 10.0);
        let s = solve(&f, 0.0).unwrap();
        assert!((s.beta[0] - 1.0).abs() < 1e-15 && (s.beta[1] - 1.0).abs() < 1e-15);
        assert!((s.value - (10.0 - 6.0)).abs() < 1e-14);
        assert_eq!(evaluate(&f, &[0.0, 0.0]).unwrap(), 10.0);
    }

    #[test]
    fn singular_falls_back_to_ridge() {
        let f = form(vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 1.0], 1.0);
        let s = solve(&f, 0.0).unwrap();
        assert!(s.regularized);
        assert!((s.ridge - 1e-10).abs() < 1e-25);
        assert!((s.beta[0] - 0.5).abs() < 1e-8 && (s.beta[1] - 0.5).abs() < 1e-8);
        assert!(s.value.abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_is_singular() {
        let f = form(vec![0.0; 4], vec![0.0; 2], 0.0);
        assert!(solve(&f, 0.0).is_err());
    }

    #[test]
    fn dimension_checks() {
        let f = form(vec![1.0], vec![1.0], 0.0);
        assert!(evaluate(&f, &[1.0, 2.0]).is_err());
        assert!(solve(&f, -1.0).is_err());
    }
}
