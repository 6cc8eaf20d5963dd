//! Gompertz mortality with deaths switched off during the first year, and
//! time-zero values of a unit whole-life benefit.

use serde::{Deserialize, Serialize};

use crate::curve::{BondCoefficients, G2ppParams};
use crate::error::{invalid, Result};
use crate::quadrature::{trapezoid_weights, uniform_nodes};

/// Force of mortality `a · e^{b·age}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GompertzParams {
    pub a: f64,
    pub b: f64,
}

impl Default for GompertzParams {
    fn default() -> Self {
        Self { a: 0.0003, b: 0.06 }
    }
}

impl GompertzParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid("a", "base hazard must be positive"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(invalid("b", "slope must be positive"));
        }
        Ok(())
    }
}

/// Admissible ages at time zero and the default scan step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeDomain {
    pub x_min: f64,
    pub x_max: f64,
    pub step: f64,
}

impl Default for AgeDomain {
    fn default() -> Self {
        Self {
            x_min: 20.0,
            x_max: 80.0,
            step: 0.5,
        }
    }
}

impl AgeDomain {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min >= 0.0 && self.x_min < self.x_max && self.x_max.is_finite()) {
            return Err(invalid("age_domain", "need 0 <= x_min < x_max"));
        }
        if !(self.step > 0.0) {
            return Err(invalid("age_domain.step", "step must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }
}

/// Maturity quadrature: trapezoid step and tail truncation on the survivor
/// index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub dt: f64,
    pub tail_eps: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            dt: 0.25,
            tail_eps: 1e-8,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(invalid("quadrature.dt", "step must be positive"));
        }
        if !(self.tail_eps > 0.0 && self.tail_eps < 1.0) {
            return Err(invalid("quadrature.tail_eps", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// `μ(s, x + s)`; zero during the first year.
pub fn force(params: &GompertzParams, s: f64, x: f64) -> Result<f64> {
    if s < 0.0 || x < 0.0 {
        return Err(invalid("force", "time and age must be non-negative"));
    }
    Ok(force_unchecked(params, s, x))
}

#[inline]
fn force_unchecked(params: &GompertzParams, s: f64, x: f64) -> f64 {
    if s < 1.0 {
        0.0
    } else {
        params.a * ((x + s) * params.b).exp()
    }
}

/// `S(x,T) = exp(−∫₁ᵀ μ(s, x+s) ds)`, closed form for constant `a`, `b`.
pub fn survivor_index(params: &GompertzParams, x: f64, maturity: f64) -> Result<f64> {
    if maturity < 1.0 {
        return Err(invalid("T", "survivor index is defined for T >= 1"));
    }
    Ok(survivor_unchecked(params, x, maturity))
}

#[inline]
fn survivor_unchecked(p: &GompertzParams, x: f64, maturity: f64) -> f64 {
    let cum = p.a / p.b * (p.b * (x + 1.0)).exp() * (p.b * (maturity - 1.0)).exp_m1();
    (-cum).exp()
}

/// Payout-time density `κ(x,T) = S(x,T) μ(T, x+T)`.
pub fn kappa(params: &GompertzParams, x: f64, maturity: f64) -> Result<f64> {
    if maturity < 1.0 {
        return Err(invalid("T", "kappa is defined for T >= 1"));
    }
    Ok(kappa_unchecked(params, x, maturity))
}

#[inline]
pub(crate) fn kappa_unchecked(params: &GompertzParams, x: f64, maturity: f64) -> f64 {
    survivor_unchecked(params, x, maturity) * force_unchecked(params, maturity, x)
}

/// Smallest `T = 1 + k·step` with `S(x,T) ≤ eps`.
pub fn choose_t_max(params: &GompertzParams, x: f64, eps: f64, step: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid("eps", "tail tolerance must lie in (0, 1]"));
    }
    if !(step > 0.0) {
        return Err(invalid("step", "grid step must be positive"));
    }
    params.validate()?;
    let target = -eps.ln() * params.b / (params.a * (params.b * (x + 1.0)).exp());
    let exact = 1.0 + target.ln_1p() / params.b;
    let mut k = ((exact - 1.0) / step - 1e-9).ceil().max(0.0);
    // guard against rounding in the inversion
    while survivor_unchecked(params, x, 1.0 + k * step) > eps {
        k += 1.0;
    }
    Ok(1.0 + k * step)
}

/// Trapezoid nodes and weights on `[1, T_max]`.
pub(crate) fn maturity_nodes(t_max: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let nodes = uniform_nodes(1.0, t_max, dt);
    let w = trapezoid_weights(&nodes);
    (nodes, w)
}

/// `∫₁^{T_max} κ(x,T) dT` by trapezoid; close to one for small `tail_eps`.
pub fn kappa_mass(params: &GompertzParams, x: f64, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    let t_max = choose_t_max(params, x, quad.tail_eps, quad.dt)?;
    let (nodes, w) = maturity_nodes(t_max, quad.dt);
    Ok(nodes
        .iter()
        .zip(&w)
        .map(|(&t, w)| w * kappa_unchecked(params, x, t))
        .sum())
}

/// Time-zero value `z₀(x) = ∫ κ(x,T) p₀(T) dT` of a unit whole-life benefit.
pub fn policy_value_t0(
    params: &GompertzParams,
    curve: &G2ppParams,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if x < 0.0 {
        return Err(invalid("x", "age must be non-negative"));
    }
    curve.validate()?;
    quad.validate()?;
    let t_max = choose_t_max(params, x, quad.tail_eps, quad.dt)?;
    let (nodes, w) = maturity_nodes(t_max, quad.dt);
    let s0 = curve.initial_state();
    Ok(nodes
        .iter()
        .zip(&w)
        .map(|(&t, w)| {
            let p0 = BondCoefficients::new(curve, 0.0, t).price(s0.chi1, s0.chi2);
            w * kappa_unchecked(params, x, t) * p0
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: GompertzParams = GompertzParams { a: 0.0003, b: 0.06 };

    #[test]
    fn no_deaths_in_first_year() {
        for &x in &[20.0, 50.0, 80.0] {
            assert_eq!(force(&G, 0.5, x).unwrap(), 0.0);
            assert_eq!(force(&G, 0.999, x).unwrap(), 0.0);
        }
    }

    #[test]
    fn force_values() {
        // 0.0003 · e^{2.46}
        let f = force(&G, 1.0, 40.0).unwrap();
        assert!((f - 0.003_511_443_461_994_256).abs() < 1e-15);
        let ratio = force(&G, 3.0, 50.0).unwrap() / force(&G, 3.0, 40.0).unwrap();
        assert!((ratio - 0.6f64.exp()).abs() < 1e-12);
        assert!(force(&G, -1.0, 40.0).is_err());
    }

    #[test]
    fn survivor_examples() {
        assert_eq!(survivor_index(&G, 40.0, 1.0).unwrap(), 1.0);
        let s = survivor_index(&G, 40.0, 40.0).unwrap();
        assert!((s - 0.577_510_860_967_000_7).abs() < 1e-14);
        assert!(survivor_index(&G, 40.0, 0.5).is_err());
        let mut prev = 1.0;
        for k in 1..200 {
            let s = survivor_index(&G, 40.0, 1.0 + 0.5 * k as f64).unwrap();
            assert!(s < prev && s > 0.0 || s == 0.0);
            assert!(survivor_index(&G, 45.0, 1.0 + 0.5 * k as f64).unwrap() <= s);
            prev = s;
        }
    }

    #[test]
    fn kappa_at_one_is_force() {
        assert_eq!(kappa(&G, 40.0, 1.0).unwrap(), force(&G, 1.0, 40.0).unwrap());
        assert!(kappa(&G, 40.0, 0.9).is_err());
    }

    #[test]
    fn t_max_examples() {
        assert_eq!(choose_t_max(&G, 70.0, 1.0, 0.25).unwrap(), 1.0);
        // S(70, T) = 1e-6 at T ≈ 62.4902, next quarter is 62.5
        assert_eq!(choose_t_max(&G, 70.0, 1e-6, 0.25).unwrap(), 62.5);
        let mut prev = f64::INFINITY;
        for k in 0..13 {
            let t = choose_t_max(&G, 20.0 + 5.0 * k as f64, 1e-8, 0.25).unwrap();
            assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn zero_rate_policy_value_is_mass() {
        let curve = G2ppParams {
            s1: 0.0,
            s2: 0.0,
            phi1: 0.0,
            phi2: 0.0,
            ..G2ppParams::default()
        };
        let quad = QuadratureSpec::default();
        for &x in &[20.0, 50.0] {
            let z = policy_value_t0(&G, &curve, x, &quad).unwrap();
            let m = kappa_mass(&G, x, &quad).unwrap();
            assert_eq!(z, m);
            assert!((z - 1.0).abs() < 1e-5);
        }
    }
}
