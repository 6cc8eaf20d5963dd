//! Closed-form hedging fixtures: one risky asset hedged with a correlated
//! second asset, and a zero-rate Black–Scholes call hedged with its delta.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{check_rho, h_norm_sq_unchecked, VolLoading};
use crate::error::{invalid, Result};
use crate::quadrature::time_weights;
use crate::stats::MCEstimate;
use crate::stochastic::{make_time_grid, RandomPlan};

/// Fine simulation grid used by [`delta_hedge_risk`]; every rebalance count
/// that divides it shares the same paths.
pub const DELTA_FINE_STEPS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolMode {
    /// `dξᵢ = sᵢ dWᵢ`
    ConstantVol,
    /// `dξᵢ = sᵢ ξᵢ dWᵢ`
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoAssetParams {
    pub s1: f64,
    pub s2: f64,
    pub rho: f64,
    pub x10: f64,
    pub x20: f64,
    pub mode: VolMode,
}

impl Default for TwoAssetParams {
    fn default() -> Self {
        Self {
            s1: 0.2,
            s2: 0.25,
            rho: 0.6,
            x10: 1.0,
            x20: 1.0,
            mode: VolMode::Lognormal,
        }
    }
}

impl TwoAssetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s1 > 0.0 && self.s1.is_finite()) {
            return Err(invalid("s1", "volatility must be positive"));
        }
        if !(self.s2 > 0.0 && self.s2.is_finite()) {
            return Err(invalid("s2", "volatility must be positive"));
        }
        check_rho(self.rho)?;
        if self.mode == VolMode::Lognormal && !(self.x10 > 0.0 && self.x20 > 0.0) {
            return Err(invalid(
                "x0",
                "lognormal assets need positive initial values",
            ));
        }
        Ok(())
    }

    /// Unhedged exposure `E ∫₀¹ σ₁,ₜ² (1 − t) dt`.
    pub fn unhedged_risk(&self) -> f64 {
        match self.mode {
            VolMode::ConstantVol => 0.5 * self.s1 * self.s1,
            VolMode::Lognormal => {
                let c = self.s1 * self.s1;
                self.x10 * self.x10 * growth_weight(c)
            }
        }
    }
}

/// `c² ∫₀¹ e^{ct} (1 − t) dt = e^c − 1 − c`, divided by `c`.
fn growth_weight(c: f64) -> f64 {
    if c.abs() < 1e-4 {
        // series of (e^c − 1 − c)/c
        c / 2.0 + c * c / 6.0 + c * c * c / 24.0
    } else {
        (c.exp_m1() - c) / c
    }
}

/// Holding in the second asset per unit of the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HedgeRule {
    /// Pathwise `ρ σ₁,ₜ / σ₂,ₜ`.
    Optimal,
    /// Optimal ratio plus a constant.
    Offset(f64),
    Constant(f64),
}

/// `ρ σ₁ / σ₂`.
pub fn optimal_ratio(rho: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    check_rho(rho)?;
    if sigma2 == 0.0 || !sigma2.is_finite() {
        return Err(invalid("sigma2", "hedge volatility must be non-zero"));
    }
    Ok(rho * sigma1 / sigma2)
}

/// Minimum of the risk functional, `(1 − ρ²) × unhedged`.
pub fn residual_risk_closed(params: &TwoAssetParams) -> Result<f64> {
    params.validate()?;
    Ok((1.0 - params.rho) * (1.0 + params.rho) * params.unhedged_risk())
}

/// Monte-Carlo risk of holding `rule` units of the second asset against the
/// first, trapezoid in time with weight `1 − t`.
pub fn residual_risk_mc(
    params: &TwoAssetParams,
    rule: HedgeRule,
    plan: &RandomPlan,
    n_steps: usize,
) -> Result<MCEstimate> {
    params.validate()?;
    let grid = make_time_grid(n_steps)?;
    let tw = time_weights(grid.times());
    let dt = grid.dt();
    let p = *params;
    let rho_c = ((1.0 - p.rho) * (1.0 + p.rho)).sqrt();
    let samples: Vec<f64> = (0..plan.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = plan.path_rng(path);
            let (mut x1, mut x2) = (p.x10, p.x20);
            let mut acc = 0.0;
            for (j, &w) in tw.iter().enumerate() {
                if j > 0 {
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let z2 = p.rho * z1 + rho_c * e;
                    match p.mode {
                        VolMode::ConstantVol => {
                            x1 += p.s1 * dt.sqrt() * z1;
                            x2 += p.s2 * dt.sqrt() * z2;
                        }
                        VolMode::Lognormal => {
                            x1 *= (p.s1 * dt.sqrt() * z1 - 0.5 * p.s1 * p.s1 * dt).exp();
                            x2 *= (p.s2 * dt.sqrt() * z2 - 0.5 * p.s2 * p.s2 * dt).exp();
                        }
                    }
                }
                if w == 0.0 {
                    continue;
                }
                let (sig1, sig2) = match p.mode {
                    VolMode::ConstantVol => (p.s1, p.s2),
                    VolMode::Lognormal => (p.s1 * x1, p.s2 * x2),
                };
                let phi = match rule {
                    HedgeRule::Optimal => p.rho * sig1 / sig2,
                    HedgeRule::Offset(d) => p.rho * sig1 / sig2 + d,
                    HedgeRule::Constant(c) => c,
                };
                acc += w * h_norm_sq_unchecked(p.rho, VolLoading::new(sig1, -phi * sig2));
            }
            acc
        })
        .collect();
    Ok(MCEstimate::from_samples(&samples))
}

/// European call on a zero-drift lognormal asset, zero rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroRateClaim {
    pub strike: f64,
    pub expiry: f64,
    pub vol: f64,
}

impl Default for ZeroRateClaim {
    fn default() -> Self {
        Self {
            strike: 1.0,
            expiry: 2.0,
            vol: 0.2,
        }
    }
}

impl ZeroRateClaim {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(invalid("strike", "must be positive"));
        }
        if !(self.expiry > 1.0 && self.expiry.is_finite()) {
            return Err(invalid("expiry", "must lie beyond the unit interval"));
        }
        if !(self.vol > 0.0 && self.vol.is_finite()) {
            return Err(invalid("vol", "must be positive"));
        }
        Ok(())
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `(price, delta)` at time `t` and spot `x`.
pub fn bs_zero_rate(claim: &ZeroRateClaim, t: f64, x: f64) -> Result<(f64, f64)> {
    claim.validate()?;
    if !(t >= 0.0 && t < claim.expiry) {
        return Err(invalid("t", "must lie in [0, expiry)"));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid("x", "spot must be positive"));
    }
    Ok(bs_unchecked(claim, t, x))
}

#[inline]
fn bs_unchecked(claim: &ZeroRateClaim, t: f64, x: f64) -> (f64, f64) {
    let sd = claim.vol * (claim.expiry - t).sqrt();
    let d_plus = (x / claim.strike).ln() / sd + 0.5 * sd;
    let d_minus = d_plus - sd;
    let delta = normal_cdf(d_plus);
    (x * delta - claim.strike * normal_cdf(d_minus), delta)
}

/// Risk of the call hedged with the delta frozen between `rebalance_steps`
/// equally spaced rebalance dates on `[0, 1]`.
pub fn delta_hedge_risk(
    claim: &ZeroRateClaim,
    x0: f64,
    rebalance_steps: usize,
    plan: &RandomPlan,
) -> Result<MCEstimate> {
    if rebalance_steps == 0 {
        return Err(invalid("rebalance_steps", "need at least one rebalance"));
    }
    hedge_risk(claim, x0, Some(rebalance_steps), plan)
}

/// Same functional with no hedge held at all.
pub fn unhedged_claim_risk(
    claim: &ZeroRateClaim,
    x0: f64,
    plan: &RandomPlan,
) -> Result<MCEstimate> {
    hedge_risk(claim, x0, None, plan)
}

fn hedge_risk(
    claim: &ZeroRateClaim,
    x0: f64,
    rebalance: Option<usize>,
    plan: &RandomPlan,
) -> Result<MCEstimate> {
    claim.validate()?;
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(invalid("x0", "spot must be positive"));
    }
    let n_fine = match rebalance {
        Some(r) => r * DELTA_FINE_STEPS.div_ceil(r),
        None => DELTA_FINE_STEPS,
    };
    let every = rebalance.map(|r| n_fine / r);
    let grid = make_time_grid(n_fine)?;
    let times = grid.times().to_vec();
    let tw = time_weights(&times);
    let dt = grid.dt();
    let s = claim.vol;
    let c = *claim;
    let samples: Vec<f64> = (0..plan.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = plan.path_rng(path);
            let mut x = x0;
            let mut held = 0.0;
            let mut acc = 0.0;
            for (j, &w) in tw.iter().enumerate() {
                if j > 0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x *= (s * dt.sqrt() * z - 0.5 * s * s * dt).exp();
                }
                let (_, delta) = bs_unchecked(&c, times[j], x);
                if let Some(k) = every {
                    if j % k == 0 {
                        held = delta;
                    }
                }
                let gap = (delta - held) * s * x;
                acc += w * gap * gap;
            }
            acc
        })
        .collect();
    Ok(MCEstimate::from_samples(&samples))
}
