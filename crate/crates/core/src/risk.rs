//! Monte-Carlo evaluation of the `(1 − t)`-weighted replication risk
//!
//! ```text
//! F = E ∫₀¹ ‖σ_exposure(t) − σ_hedge(t)‖²_H (1 − t) dt
//! ```
//!
//! for static single-instrument hedges: one bond replacing a bond portfolio,
//! one model point replacing a whole-life portfolio. Both hedges are scaled
//! to match the exposure's value at time zero.

use ndarray::{linalg::general_mat_mul, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{h_norm_sq_unchecked, BondCoefficients, G2ppParams, LoadingTable, VolLoading};
use crate::error::{invalid, Error, Result};
use crate::mortality::{
    choose_t_max, kappa_unchecked, maturity_nodes, policy_value_t0, AgeDomain, GompertzParams,
    QuadratureSpec,
};
use crate::quadrature::time_weights;
use crate::stats::{variance_estimate, MCEstimate};
use crate::stochastic::FactorPathSet;

/// Paths per work item. Fixed so reductions never depend on the pool size.
const BLOCK: usize = 64;

/// Static bond portfolio `Σ αₖ δ_{Tₖ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondPortfolio {
    entries: Vec<(f64, f64)>,
}

impl BondPortfolio {
    /// `entries` are `(nominal, maturity)` pairs.
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("portfolio", "at least one bond is required"));
        }
        for (i, &(a, t)) in entries.iter().enumerate() {
            if !a.is_finite() {
                return Err(invalid("portfolio", "nominals must be finite"));
            }
            if !(t > 1.0 && t.is_finite()) {
                return Err(Error::Maturity {
                    maturity: t,
                    reason: "portfolio maturities must exceed one year",
                });
            }
            if entries[..i].iter().any(|&(_, u)| u == t) {
                return Err(invalid("portfolio", format!("duplicate maturity {t}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn maturities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn nominals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(a, t)| (c * a, t)).collect(),
        }
    }
}

/// Whole-life portfolio `Σ αₖ δ_{xₖ}` indexed by age at time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyPortfolio {
    entries: Vec<(f64, f64)>,
}

impl PolicyPortfolio {
    /// `entries` are `(count, age)` pairs.
    pub fn new(entries: Vec<(f64, f64)>, domain: &AgeDomain) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("policies", "at least one policy is required"));
        }
        for (i, &(a, x)) in entries.iter().enumerate() {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(invalid("policies", "counts must be non-negative"));
            }
            if !domain.contains(x) {
                return Err(invalid(
                    "policies",
                    format!("age {x} outside the age domain"),
                ));
            }
            if entries[..i].iter().any(|&(_, y)| y == x) {
                return Err(invalid("policies", format!("duplicate age {x}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn ages(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(a, x)| (c * a, x)).collect(),
        }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub label: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl ScanPoint {
    pub fn estimate(&self) -> MCEstimate {
        MCEstimate {
            mean: self.mean,
            std_error: self.std_error,
            n_paths: self.n_paths,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub label: f64,
    pub value: f64,
}

/// Risk estimates over a grid of candidate labels, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScan {
    pub points: Vec<ScanPoint>,
    pub minimizer: Minimizer,
}

impl RiskScan {
    pub fn from_points(mut points: Vec<ScanPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("scan", "no candidates"));
        }
        points.sort_by(|a, b| a.label.total_cmp(&b.label));
        let (label, value) = refine_minimum(&points);
        Ok(Self {
            points,
            minimizer: Minimizer { label, value },
        })
    }

    pub fn labels(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.label).collect()
    }

    pub fn value_at(&self, label: f64) -> Option<&ScanPoint> {
        self.points.iter().find(|p| p.label == label)
    }
}

/// Grid `lo, lo + step, ..., ≤ hi`, rounded to 1e-10 and snapped onto any
/// of `snap` within 1e-9, so portfolio labels appear bit-exactly.
pub fn label_grid(lo: f64, hi: f64, step: f64, snap: &[f64]) -> Result<Vec<f64>> {
    if !(step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(invalid("scan", "need lo <= hi and step > 0"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let x = ((lo + k as f64 * step) * 1e10).round() / 1e10;
            snap.iter()
                .copied()
                .find(|s| (s - x).abs() < 1e-9)
                .unwrap_or(x)
        })
        .collect())
}

fn check_sim(curve: &G2ppParams, sim: &FactorPathSet) -> Result<()> {
    curve.validate()?;
    if sim.params() != curve {
        return Err(Error::GridMismatch(
            "paths were simulated with different model parameters".into(),
        ));
    }
    if sim.grid().horizon() != 1.0 {
        return Err(Error::GridMismatch(
            "paths must cover the unit interval".into(),
        ));
    }
    Ok(())
}

fn initial_discounted(curve: &G2ppParams, maturity: f64) -> f64 {
    let s0 = curve.initial_state();
    BondCoefficients::new(curve, 0.0, maturity).price(s0.chi1, s0.chi2)
}

/// Nominal `α(T) = Σ αₖ p₀(Tₖ) / p₀(T)` matching the portfolio value at
/// time zero.
pub fn bond_alpha(curve: &G2ppParams, portfolio: &BondPortfolio, maturity: f64) -> Result<f64> {
    curve.validate()?;
    if !(maturity > 1.0) {
        return Err(Error::Maturity {
            maturity,
            reason: "candidate maturities must exceed one year",
        });
    }
    let p = initial_discounted(curve, maturity);
    // ratio per term so that α(Tₖ) = αₖ exactly for a single bond
    Ok(portfolio
        .entries
        .iter()
        .map(|&(a, t)| a * (initial_discounted(curve, t) / p))
        .sum())
}

/// Runs `f(path, out)` for every path in fixed blocks and returns the
/// per-path rows (`width` values each) in path order.
fn per_path<F>(n_paths: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync,
{
    let mut out = vec![0.0; n_paths * width];
    out.par_chunks_mut(BLOCK * width.max(1))
        .enumerate()
        .for_each(|(b, chunk)| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(n_paths);
            f(start..end, chunk);
        });
    out
}

fn column_estimates(rows: &[f64], n_paths: usize, width: usize) -> Vec<MCEstimate> {
    (0..width)
        .map(|c| {
            let col: Vec<f64> = (0..n_paths).map(|p| rows[p * width + c]).collect();
            MCEstimate::from_samples(&col)
        })
        .collect()
}

/// Per-path weighted mismatch integrals for static bond hedges. Each hedge
/// is a list of `(nominal, index into maturities)`.
fn bond_hedge_integrals(
    curve: &G2ppParams,
    exposure: &[(f64, usize)],
    hedges: &[Vec<(f64, usize)>],
    maturities: &[f64],
    sim: &FactorPathSet,
) -> Vec<f64> {
    let times = sim.grid().times();
    let table = LoadingTable::new(curve, times, maturities);
    let tw = time_weights(times);
    let width = hedges.len();
    let rho = curve.rho;
    per_path(sim.n_paths(), width, |paths, out| {
        let m = table.n_mats();
        let (mut v1, mut v2) = (vec![0.0; m], vec![0.0; m]);
        for (row, path) in paths.enumerate() {
            let acc = &mut out[row * width..(row + 1) * width];
            for (j, &w) in tw.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                table.loadings(j, &sim.state(path, j), &mut v1, &mut v2);
                let e = exposure.iter().fold(VolLoading::default(), |s, &(a, k)| {
                    s + VolLoading::new(a * v1[k], a * v2[k])
                });
                for (slot, hedge) in acc.iter_mut().zip(hedges) {
                    let h = hedge.iter().fold(VolLoading::default(), |s, &(a, k)| {
                        s + VolLoading::new(a * v1[k], a * v2[k])
                    });
                    *slot += w * h_norm_sq_unchecked(rho, e - h);
                }
            }
        }
    })
}

fn index_maturities(
    portfolio: &BondPortfolio,
    extra: &[f64],
) -> (Vec<f64>, Vec<(f64, usize)>, Vec<usize>) {
    let mut mats: Vec<f64> = Vec::new();
    let idx = |t: f64, mats: &mut Vec<f64>| match mats.iter().position(|&u| u == t) {
        Some(i) => i,
        None => {
            mats.push(t);
            mats.len() - 1
        }
    };
    let exposure = portfolio
        .entries
        .iter()
        .map(|&(a, t)| (a, idx(t, &mut mats)))
        .collect();
    let extra_idx = extra.iter().map(|&t| idx(t, &mut mats)).collect();
    (mats, exposure, extra_idx)
}

/// Risk of replacing `exposure` by the static bond position `hedge`
/// (`(nominal, maturity)` pairs, possibly empty).
pub fn replication_risk(
    curve: &G2ppParams,
    exposure: &BondPortfolio,
    hedge: &[(f64, f64)],
    sim: &FactorPathSet,
) -> Result<MCEstimate> {
    check_sim(curve, sim)?;
    for &(_, t) in hedge {
        if !(t > 1.0) {
            return Err(Error::Maturity {
                maturity: t,
                reason: "hedge maturities must exceed one year",
            });
        }
    }
    let hedge_mats: Vec<f64> = hedge.iter().map(|h| h.1).collect();
    let (mats, exp_idx, h_idx) = index_maturities(exposure, &hedge_mats);
    let hedge: Vec<(f64, usize)> = hedge.iter().zip(h_idx).map(|(h, k)| (h.0, k)).collect();
    let rows = bond_hedge_integrals(curve, &exp_idx, &[hedge], &mats, sim);
    Ok(MCEstimate::from_samples(&rows))
}

/// Scan of the single-bond replication risk `F(T)` over candidate maturities,
/// each candidate carrying the nominal [`bond_alpha`].
pub fn bond_risk_scan(
    curve: &G2ppParams,
    portfolio: &BondPortfolio,
    maturity_grid: &[f64],
    sim: &FactorPathSet,
) -> Result<RiskScan> {
    check_sim(curve, sim)?;
    if maturity_grid.is_empty() {
        return Err(invalid("scan", "no candidate maturities"));
    }
    let (mats, exp_idx, cand_idx) = index_maturities(portfolio, maturity_grid);
    let mut hedges = Vec::with_capacity(maturity_grid.len());
    for (&t, &k) in maturity_grid.iter().zip(&cand_idx) {
        hedges.push(vec![(bond_alpha(curve, portfolio, t)?, k)]);
    }
    let rows = bond_hedge_integrals(curve, &exp_idx, &hedges, &mats, sim);
    let est = column_estimates(&rows, sim.n_paths(), hedges.len());
    RiskScan::from_points(
        maturity_grid
            .iter()
            .zip(est)
            .map(|(&label, e)| ScanPoint {
                label,
                mean: e.mean,
                std_error: e.std_error,
                n_paths: e.n_paths,
            })
            .collect(),
    )
}

/// Model-point count `α(x) = Σ αₖ z₀(xₖ) / z₀(x)`.
pub fn life_alpha(
    curve: &G2ppParams,
    mortality: &GompertzParams,
    portfolio: &PolicyPortfolio,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let z = policy_value_t0(mortality, curve, x, quad)?;
    if !(z > 0.0) {
        return Err(Error::Degenerate(format!("policy value at age {x} is {z}")));
    }
    let mut alpha = 0.0;
    for &(a, xk) in &portfolio.entries {
        alpha += a * (policy_value_t0(mortality, curve, xk, quad)? / z);
    }
    Ok(alpha)
}

/// Scan of the model-point risk `V(x)` over candidate ages.
///
/// The κ-mismatch weights `Σ αₖκ(xₖ,T) − α(x)κ(x,T)` are fixed per
/// candidate, so per time node the effective loadings of all candidates are
/// one matrix product of the path-block loadings with the weight matrix.
pub fn life_risk_scan(
    curve: &G2ppParams,
    mortality: &GompertzParams,
    portfolio: &PolicyPortfolio,
    age_grid: &[f64],
    quad: &QuadratureSpec,
    sim: &FactorPathSet,
) -> Result<RiskScan> {
    check_sim(curve, sim)?;
    mortality.validate()?;
    quad.validate()?;
    if age_grid.is_empty() {
        return Err(invalid("scan", "no candidate ages"));
    }
    if age_grid.iter().any(|&x| !(x >= 0.0)) {
        return Err(invalid("scan", "ages must be non-negative"));
    }
    let youngest = age_grid
        .iter()
        .chain(portfolio.ages().iter())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let t_max = choose_t_max(mortality, youngest, quad.tail_eps, quad.dt)?;
    let (nodes, node_w) = maturity_nodes(t_max, quad.dt);

    let n_nodes = nodes.len();
    let n_cand = age_grid.len();
    let exposure: Vec<f64> = nodes
        .iter()
        .map(|&t| {
            portfolio
                .entries
                .iter()
                .map(|&(a, xk)| a * kappa_unchecked(mortality, xk, t))
                .sum()
        })
        .collect();
    let mut weights = Array2::<f64>::zeros((n_nodes, n_cand));
    for (c, &x) in age_grid.iter().enumerate() {
        let alpha = life_alpha(curve, mortality, portfolio, x, quad)?;
        for n in 0..n_nodes {
            let mismatch = exposure[n] - alpha * kappa_unchecked(mortality, x, nodes[n]);
            weights[[n, c]] = node_w[n] * mismatch;
        }
    }

    let times = sim.grid().times();
    let table = LoadingTable::new(curve, times, &nodes);
    let tw = time_weights(times);
    let rho = curve.rho;
    let rows = per_path(sim.n_paths(), n_cand, |paths, out| {
        let nb = paths.len();
        let mut v1 = Array2::<f64>::zeros((nb, n_nodes));
        let mut v2 = Array2::<f64>::zeros((nb, n_nodes));
        let mut g1 = Array2::<f64>::zeros((nb, n_cand));
        let mut g2 = Array2::<f64>::zeros((nb, n_cand));
        for (j, &w) in tw.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (r, path) in paths.clone().enumerate() {
                let st = sim.state(path, j);
                let a = v1.row_mut(r).into_slice().expect("row-major");
                let b = v2.row_mut(r).into_slice().expect("row-major");
                table.loadings(j, &st, a, b);
            }
            general_mat_mul(1.0, &v1, &weights, 0.0, &mut g1);
            general_mat_mul(1.0, &v2, &weights, 0.0, &mut g2);
            for r in 0..nb {
                for c in 0..n_cand {
                    let g = VolLoading::new(g1[[r, c]], g2[[r, c]]);
                    out[r * n_cand + c] += w * h_norm_sq_unchecked(rho, g);
                }
            }
        }
    });
    let est = column_estimates(&rows, sim.n_paths(), n_cand);
    RiskScan::from_points(
        age_grid
            .iter()
            .zip(est)
            .map(|(&label, e)| ScanPoint {
                label,
                mean: e.mean,
                std_error: e.std_error,
                n_paths: e.n_paths,
            })
            .collect(),
    )
}

/// Both sides of the isometry `Var Fₜ = E ∫₀ᵗ ‖Δσₛ‖²_H ds` for the
/// discrepancy `Fₜ = Σ αₖ pₜ(Tₖ) − α(T) pₜ(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceIdentity {
    /// Sample variance of `Fₜ` across paths.
    pub lhs: MCEstimate,
    /// Path average of the trapezoid integral of the squared loading gap.
    pub rhs: MCEstimate,
}

impl VarianceIdentity {
    pub fn z_score(&self) -> f64 {
        self.lhs.z_score(&self.rhs)
    }

    pub fn passes(&self, n_se: f64) -> bool {
        self.z_score() <= n_se
    }
}

pub fn variance_identity_check(
    curve: &G2ppParams,
    portfolio: &BondPortfolio,
    candidate: f64,
    t: f64,
    sim: &FactorPathSet,
) -> Result<VarianceIdentity> {
    check_sim(curve, sim)?;
    let jt = sim
        .grid()
        .index_of(t)
        .ok_or_else(|| invalid("t", format!("{t} is not a grid node")))?;
    let alpha = bond_alpha(curve, portfolio, candidate)?;
    let (mats, exp_idx, cand) = index_maturities(portfolio, &[candidate]);
    let k_cand = cand[0];
    let times = &sim.grid().times()[..=jt];
    let table = LoadingTable::new(curve, times, &mats);
    let tw = crate::quadrature::trapezoid_weights(times);
    let rho = curve.rho;
    let rows = per_path(sim.n_paths(), 2, |paths, out| {
        let m = mats.len();
        let (mut v1, mut v2, mut pr) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for (row, path) in paths.enumerate() {
            let mut integral = 0.0;
            for (j, &w) in tw.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                table.loadings(j, &sim.state(path, j), &mut v1, &mut v2);
                let e = exp_idx.iter().fold(VolLoading::default(), |s, &(a, k)| {
                    s + VolLoading::new(a * v1[k], a * v2[k])
                });
                let h = VolLoading::new(alpha * v1[k_cand], alpha * v2[k_cand]);
                integral += w * h_norm_sq_unchecked(rho, e - h);
            }
            table.prices(jt, &sim.state(path, jt), &mut pr);
            let f: f64 = exp_idx.iter().map(|&(a, k)| a * pr[k]).sum::<f64>() - alpha * pr[k_cand];
            out[row * 2] = f;
            out[row * 2 + 1] = integral;
        }
    });
    let n = sim.n_paths();
    let f: Vec<f64> = (0..n).map(|p| rows[2 * p]).collect();
    let q: Vec<f64> = (0..n).map(|p| rows[2 * p + 1]).collect();
    Ok(VarianceIdentity {
        lhs: variance_estimate(&f),
        rhs: MCEstimate::from_samples(&q),
    })
}

/// Discrete argmin of the scan refined by a parabola through the bracketing
/// points; ties go to the smaller label.
pub fn find_minimum(scan: &RiskScan) -> Minimizer {
    let (label, value) = refine_minimum(&scan.points);
    Minimizer { label, value }
}

fn refine_minimum(points: &[ScanPoint]) -> (f64, f64) {
    let mut i = 0;
    for (k, p) in points.iter().enumerate() {
        if p.mean < points[i].mean {
            i = k;
        }
    }
    let (x1, f1) = (points[i].label, points[i].mean);
    // a vanishing functional is already at its global minimum
    if f1 == 0.0 || i == 0 || i + 1 == points.len() {
        return (x1, f1);
    }
    let (x0, f0) = (points[i - 1].label, points[i - 1].mean);
    let (x2, f2) = (points[i + 1].label, points[i + 1].mean);
    let d01 = (f1 - f0) / (x1 - x0);
    let d12 = (f2 - f1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if !(curv > 0.0) {
        return (x1, f1);
    }
    // vertex of the interpolating parabola
    let xv = 0.5 * (x0 + x1) - 0.5 * d01 / curv;
    let xv = xv.clamp(x0, x2);
    let fv = f1 + d01 * (xv - x1) + curv * (xv - x0) * (xv - x1);
    if fv < 0.0 || fv > f1 {
        (x1, f1)
    } else {
        (xv, fv)
    }
}
