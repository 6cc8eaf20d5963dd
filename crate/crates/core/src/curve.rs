//! Closed-form zero-coupon prices and diffusion loadings under the
//! two-additive-factor Gaussian short-rate model
//!
//! ```text
//! r(t) = χ₁(t) + χ₂(t) + φ(t),   dχᵢ = −aᵢ χᵢ dt + σᵢ dWᵢ,   d⟨W₁,W₂⟩ = ρ dt
//! φ(t) = φ₁ + φ₂ t
//! ```
//!
//! Loadings live in the two-dimensional factor space with the correlated
//! metric `⟨e₁,e₂⟩ = ρ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stochastic::kernels;

/// Parameters of the two-factor model. `Default` is the reference set used
/// by the shipped bond and life configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2ppParams {
    pub a1: f64,
    pub a2: f64,
    pub s1: f64,
    pub s2: f64,
    pub rho: f64,
    #[serde(default)]
    pub chi10: f64,
    #[serde(default)]
    pub chi20: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl Default for G2ppParams {
    fn default() -> Self {
        Self {
            a1: 0.12,
            a2: 0.1,
            s1: 0.16,
            s2: 0.15,
            rho: -0.01,
            chi10: 0.0,
            chi20: 0.0,
            phi1: 0.01,
            phi2: 0.15,
        }
    }
}

impl G2ppParams {
    /// Zero volatilities are accepted: they give the deterministic limit.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a1, self.a2, self.s1, self.s2, self.rho, self.chi10, self.chi20, self.phi1,
            self.phi2,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid("params", "all parameters must be finite"));
        }
        if self.a1 <= 0.0 {
            return Err(invalid("a1", "mean reversion must be positive"));
        }
        if self.a2 <= 0.0 {
            return Err(invalid("a2", "mean reversion must be positive"));
        }
        if self.s1 < 0.0 {
            return Err(invalid("s1", "volatility must be non-negative"));
        }
        if self.s2 < 0.0 {
            return Err(invalid("s2", "volatility must be non-negative"));
        }
        check_rho(self.rho)
    }

    pub fn a(&self, i: usize) -> f64 {
        [self.a1, self.a2][i]
    }

    pub fn sigma(&self, i: usize) -> f64 {
        [self.s1, self.s2][i]
    }

    pub fn chi0(&self, i: usize) -> f64 {
        [self.chi10, self.chi20][i]
    }

    /// Instantaneous correlation between driver `i` and driver `j`.
    pub fn corr(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            self.rho
        }
    }

    pub fn initial_state(&self) -> CurveState {
        CurveState {
            t: 0.0,
            chi1: self.chi10,
            chi2: self.chi20,
            y1: 0.0,
            y2: 0.0,
        }
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(invalid(
            "rho",
            format!("correlation {rho} must lie in (-1, 1)"),
        ))
    }
}

/// Factor values and their running integrals at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveState {
    pub t: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub y1: f64,
    pub y2: f64,
}

/// Diffusion loading of a discounted price on `(W₁, W₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VolLoading {
    pub v1: f64,
    pub v2: f64,
}

impl VolLoading {
    pub fn new(v1: f64, v2: f64) -> Self {
        Self { v1, v2 }
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(c * self.v1, c * self.v2)
    }
}

impl std::ops::Add for VolLoading {
    type Output = VolLoading;
    fn add(self, o: Self) -> Self {
        Self::new(self.v1 + o.v1, self.v2 + o.v2)
    }
}

impl std::ops::Sub for VolLoading {
    type Output = VolLoading;
    fn sub(self, o: Self) -> Self {
        Self::new(self.v1 - o.v1, self.v2 - o.v2)
    }
}

/// `∫₀ᵗ φ(s) ds` for the affine shift.
pub fn shift_integral(params: &G2ppParams, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(invalid("t", "time must be non-negative"));
    }
    Ok(shift_integral_unchecked(params, t))
}

#[inline]
pub(crate) fn shift_integral_unchecked(params: &G2ppParams, t: f64) -> f64 {
    params.phi1 * t + 0.5 * params.phi2 * t * t
}

/// `(1 − e^{−a(T−t)}) / a`.
pub fn b_factor(a: f64, t: f64, maturity: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(invalid("a", "mean reversion must be positive"));
    }
    if maturity < t {
        return Err(Error::Maturity {
            maturity,
            reason: "maturity precedes the valuation time",
        });
    }
    Ok(kernels::decay_integral(a, maturity - t))
}

/// Conditional variance of `∫ₜᵀ (χ₁ + χ₂) ds`.
pub fn integrated_variance(params: &G2ppParams, tau: f64) -> f64 {
    let mut v = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            v += params.sigma(i)
                * params.sigma(j)
                * params.corr(i, j)
                * kernels::zz(params.a(i), params.a(j), tau);
        }
    }
    v
}

/// Deterministic pieces of `P(t,T) = exp(c − b₁χ₁ − b₂χ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondCoefficients {
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
}

impl BondCoefficients {
    /// Requires `T ≥ t ≥ 0`; no restriction to maturities after one year.
    pub fn new(params: &G2ppParams, t: f64, maturity: f64) -> Self {
        let tau = maturity - t;
        debug_assert!(tau >= 0.0);
        let b1 = kernels::decay_integral(params.a1, tau);
        let b2 = kernels::decay_integral(params.a2, tau);
        let c = -(shift_integral_unchecked(params, maturity) - shift_integral_unchecked(params, t))
            + 0.5 * integrated_variance(params, tau);
        Self { b1, b2, c }
    }

    #[inline]
    pub fn price(&self, chi1: f64, chi2: f64) -> f64 {
        (self.c - self.b1 * chi1 - self.b2 * chi2).exp()
    }
}

/// Precomputed bond coefficients on a (time node × maturity) lattice, used
/// to evaluate discounted prices and loadings along simulated paths.
#[derive(Debug, Clone)]
pub(crate) struct LoadingTable {
    params: G2ppParams,
    n_mats: usize,
    coef: Vec<BondCoefficients>,
}

impl LoadingTable {
    /// Requires every maturity to be at or after every time node.
    pub fn new(params: &G2ppParams, times: &[f64], maturities: &[f64]) -> Self {
        let mut coef = Vec::with_capacity(times.len() * maturities.len());
        for &t in times {
            for &m in maturities {
                coef.push(BondCoefficients::new(params, t, m));
            }
        }
        Self {
            params: *params,
            n_mats: maturities.len(),
            coef,
        }
    }

    pub fn n_mats(&self) -> usize {
        self.n_mats
    }

    /// Discounted prices at node `j` into `prices`.
    #[inline]
    pub fn prices(&self, j: usize, state: &CurveState, prices: &mut [f64]) {
        let d = discount_factor(&self.params, state);
        let row = &self.coef[j * self.n_mats..(j + 1) * self.n_mats];
        for (p, k) in prices.iter_mut().zip(row) {
            *p = d * k.price(state.chi1, state.chi2);
        }
    }

    /// Loading components at node `j` into `v1`, `v2`.
    #[inline]
    pub fn loadings(&self, j: usize, state: &CurveState, v1: &mut [f64], v2: &mut [f64]) {
        let d = discount_factor(&self.params, state);
        let row = &self.coef[j * self.n_mats..(j + 1) * self.n_mats];
        let (s1, s2) = (self.params.s1, self.params.s2);
        for ((k, a), b) in row.iter().zip(v1.iter_mut()).zip(v2.iter_mut()) {
            let p = d * k.price(state.chi1, state.chi2);
            *a = -s1 * k.b1 * p;
            *b = -s2 * k.b2 * p;
        }
    }
}

fn check_maturity(state: &CurveState, maturity: f64) -> Result<()> {
    if !(state.t >= 0.0 && state.t <= 1.0) {
        return Err(invalid("t", "valuation time must lie in [0, 1]"));
    }
    if !(maturity > 1.0) {
        return Err(Error::Maturity {
            maturity,
            reason: "bonds expiring within the first year are excluded",
        });
    }
    if !(maturity > state.t) {
        return Err(Error::Maturity {
            maturity,
            reason: "maturity must follow the valuation time",
        });
    }
    Ok(())
}

/// Undiscounted zero-coupon price `P(t,T)`; requires `T > 1 ≥ t`.
pub fn zero_bond(params: &G2ppParams, state: &CurveState, maturity: f64) -> Result<f64> {
    check_maturity(state, maturity)?;
    Ok(BondCoefficients::new(params, state.t, maturity).price(state.chi1, state.chi2))
}

/// Money-market discount `exp(−y₁ − y₂ − ∫₀ᵗ φ)`.
pub fn discount_factor(params: &G2ppParams, state: &CurveState) -> f64 {
    (-state.y1 - state.y2 - shift_integral_unchecked(params, state.t)).exp()
}

/// Discounted price `p_t(T) = D(t) P(t,T)`.
pub fn discounted_bond(params: &G2ppParams, state: &CurveState, maturity: f64) -> Result<f64> {
    Ok(discount_factor(params, state) * zero_bond(params, state, maturity)?)
}

/// `(−σ₁ B₁ p, −σ₂ B₂ p)`, the loading of `p_t(T)` on `(W₁, W₂)`.
pub fn vol_loading(params: &G2ppParams, state: &CurveState, maturity: f64) -> Result<VolLoading> {
    check_maturity(state, maturity)?;
    let k = BondCoefficients::new(params, state.t, maturity);
    let p = discount_factor(params, state) * k.price(state.chi1, state.chi2);
    Ok(VolLoading::new(
        -params.s1 * k.b1 * p,
        -params.s2 * k.b2 * p,
    ))
}

/// Correlated inner product `u₁v₁ + u₂v₂ + ρ(u₁v₂ + u₂v₁)`.
pub fn h_inner(rho: f64, u: VolLoading, v: VolLoading) -> Result<f64> {
    check_rho(rho)?;
    Ok(h_inner_unchecked(rho, u, v))
}

#[inline]
pub(crate) fn h_inner_unchecked(rho: f64, u: VolLoading, v: VolLoading) -> f64 {
    u.v1 * v.v1 + u.v2 * v.v2 + rho * (u.v1 * v.v2 + u.v2 * v.v1)
}

/// `‖v‖²` in the correlated metric.
pub fn h_norm_sq(rho: f64, v: VolLoading) -> Result<f64> {
    check_rho(rho)?;
    Ok(h_norm_sq_unchecked(rho, v))
}

/// Evaluated as `(v₁ + ρv₂)² + (1 − ρ)(1 + ρ)v₂²`, which cannot round below
/// zero even when `|ρ|` is close to one.
#[inline]
pub(crate) fn h_norm_sq_unchecked(rho: f64, v: VolLoading) -> f64 {
    let w = v.v1 + rho * v.v2;
    w * w + (1.0 - rho) * (1.0 + rho) * v.v2 * v.v2
}
