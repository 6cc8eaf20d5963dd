//! One function per subcommand. Each returns a [`Summary`] holding the rows
//! for the CSV and everything else that goes into the JSON file.

use hedgerep::curve::{discount_factor, discounted_bond, zero_bond};
use hedgerep::hedging::{
    bs_zero_rate, delta_hedge_risk, optimal_ratio, residual_risk_closed, residual_risk_mc,
    unhedged_claim_risk, HedgeRule, TwoAssetParams, VolMode,
};
use hedgerep::mortality::{kappa_mass, QuadratureSpec};
use hedgerep::quadratic::{assemble, evaluate, solve};
use hedgerep::risk::{
    bond_risk_scan, label_grid, life_risk_scan, replication_risk, variance_identity_check, RiskScan,
};
use hedgerep::stochastic::{make_time_grid, simulate, TimeGrid};
use hedgerep::{FactorPathSet, G2ppParams, MCEstimate, RandomPlan};
use serde::Serialize;

use crate::config::{RunConfig, SimulationBlock};
use crate::Failure;

/// Row label: a maturity, age or rebalance count, or a check name.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Label {
    Value(f64),
    Name(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub label: Label,
    pub mean: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimizerOut {
    pub label: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub std_error: Option<f64>,
}

impl Check {
    /// `|mean − reference| ≤ n_se · SE + floor`.
    fn mc(name: String, est: MCEstimate, reference: f64, n_se: f64, floor: f64) -> Self {
        let tolerance = n_se * est.std_error + floor;
        Self {
            name,
            passed: (est.mean - reference).abs() <= tolerance,
            measured: est.mean,
            reference,
            tolerance,
            std_error: Some(est.std_error),
        }
    }

    fn flag(name: &str, passed: bool, measured: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed,
            measured,
            reference,
            tolerance,
            std_error: None,
        }
    }

    fn row(&self) -> Row {
        Row {
            label: Label::Name(self.name.clone()),
            mean: self.measured,
            std_error: self.std_error,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSolution {
    pub basis: Vec<f64>,
    pub beta: Vec<f64>,
    pub value: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub regularized: bool,
    pub ridge: f64,
    pub condition_estimate: f64,
    /// Functional at `beta` evaluated pathwise on the same paths.
    pub direct: MCEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoAssetReport {
    pub mode: VolMode,
    pub closed: f64,
    pub mc: MCEstimate,
    pub unhedged: f64,
    pub unhedged_mc: MCEstimate,
    pub optimal_ratio: f64,
    pub grid_ratio: f64,
    pub offsets: Vec<(f64, MCEstimate)>,
    pub near_perfect: MCEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct HedgeReport {
    pub two_asset: Vec<TwoAssetReport>,
    pub ladder_unhedged: MCEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub scan: Vec<Row>,
    pub minimizer: Option<MinimizerOut>,
    pub validation: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<FitSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hedge: Option<HedgeReport>,
}

impl Summary {
    fn new(command: &str, cfg: &RunConfig, sim: &SimulationBlock) -> Self {
        Self {
            command: command.to_string(),
            config: cfg.clone(),
            seed: sim.seed,
            scan: Vec::new(),
            minimizer: None,
            validation: Vec::new(),
            solution: None,
            hedge: None,
        }
    }

    pub fn failures(&self) -> usize {
        self.validation.iter().filter(|c| !c.passed).count()
    }

    fn take_scan(&mut self, scan: &RiskScan) {
        self.scan = scan
            .points
            .iter()
            .map(|p| Row {
                label: Label::Value(p.label),
                mean: p.mean,
                std_error: Some(p.std_error),
            })
            .collect();
        self.minimizer = Some(MinimizerOut {
            label: Some(scan.minimizer.label),
            value: scan.minimizer.value,
        });
        let finite = scan
            .points
            .iter()
            .all(|p| p.mean.is_finite() && p.std_error.is_finite());
        let lowest = scan
            .points
            .iter()
            .map(|p| p.mean)
            .fold(f64::INFINITY, f64::min);
        self.validation.push(Check::flag(
            "scan finite",
            finite,
            scan.points.len() as f64,
            0.0,
            0.0,
        ));
        self.validation.push(Check::flag(
            "scan non-negative",
            lowest >= 0.0,
            lowest,
            0.0,
            0.0,
        ));
    }
}

fn unit_paths(curve: &G2ppParams, sim: &SimulationBlock) -> Result<FactorPathSet, Failure> {
    let plan = RandomPlan::new(sim.seed, sim.n_paths)?;
    Ok(simulate(curve, &make_time_grid(sim.n_steps)?, &plan)?)
}

fn scan_grid(cfg: &RunConfig, snap: &[f64]) -> Result<Vec<f64>, Failure> {
    let s = cfg.scan()?;
    label_grid(s.lo, s.hi, s.step, snap).map_err(|e| Failure::Config(format!("[scan] {e}")))
}

pub fn bond_scan(cfg: &RunConfig) -> Result<Summary, Failure> {
    let curve = cfg.model()?;
    let sim = cfg.simulation()?;
    let portfolio = cfg.bonds()?;
    let grid = scan_grid(cfg, &portfolio.maturities())?;
    if grid[0] <= 1.0 {
        return Err(Failure::Config(
            "[scan] candidate maturities must exceed 1".into(),
        ));
    }
    let paths = unit_paths(&curve, &sim)?;
    let scan = bond_risk_scan(&curve, &portfolio, &grid, &paths)?;
    let mut out = Summary::new("bond-scan", cfg, &sim);
    out.take_scan(&scan);
    Ok(out)
}

pub fn life_scan(cfg: &RunConfig) -> Result<Summary, Failure> {
    let curve = cfg.model()?;
    let sim = cfg.simulation()?;
    let (gompertz, domain) = cfg.mortality()?;
    let quad = cfg.quadrature()?;
    let portfolio = cfg.policies(&domain)?;
    let grid = scan_grid(cfg, &portfolio.ages())?;
    if !grid.iter().all(|&x| domain.contains(x)) {
        return Err(Failure::Config(
            "[scan] ages must lie in the mortality age range".into(),
        ));
    }
    let paths = unit_paths(&curve, &sim)?;
    let scan = life_risk_scan(&curve, &gompertz, &portfolio, &grid, &quad, &paths)?;
    let mut out = Summary::new("life-scan", cfg, &sim);
    out.take_scan(&scan);
    Ok(out)
}

pub fn quad_fit(cfg: &RunConfig) -> Result<Summary, Failure> {
    let curve = cfg.model()?;
    let sim = cfg.simulation()?;
    let portfolio = cfg.bonds()?;
    let fit = cfg.fit()?;
    let mut sorted = fit.basis.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() || sorted[0] <= 1.0 || sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::Config(
            "[fit] basis needs distinct maturities above 1".into(),
        ));
    }
    if !(fit.ridge >= 0.0 && fit.ridge.is_finite()) {
        return Err(Failure::Config("[fit] ridge must be non-negative".into()));
    }
    let paths = unit_paths(&curve, &sim)?;
    let form = assemble(&curve, &portfolio, &fit.basis, &paths)?;
    let sol = solve(&form, fit.ridge)?;
    let hedge: Vec<(f64, f64)> = sol
        .beta
        .iter()
        .copied()
        .zip(fit.basis.iter().copied())
        .collect();
    let direct = replication_risk(&curve, &portfolio, &hedge, &paths)?;
    let value = evaluate(&form, &sol.beta)?;

    let mut out = Summary::new("quad-fit", cfg, &sim);
    out.scan = fit
        .basis
        .iter()
        .zip(&sol.beta)
        .map(|(&t, &b)| Row {
            label: Label::Value(t),
            mean: b,
            std_error: None,
        })
        .collect();
    out.minimizer = Some(MinimizerOut { label: None, value });
    let finite = sol.beta.iter().all(|b| b.is_finite()) && value.is_finite();
    out.validation
        .push(Check::flag("solution finite", finite, value, 0.0, 0.0));
    let slack = 1e-12 * form.c;
    out.validation.push(Check::flag(
        "optimum within [0, C]",
        value >= -slack && value <= form.c + slack,
        value,
        form.c,
        slack,
    ));
    let tol = 1e-9 * form.c.max(direct.mean.abs());
    out.validation.push(Check::flag(
        "form matches pathwise functional",
        (value - direct.mean).abs() <= tol,
        direct.mean,
        value,
        tol,
    ));
    out.solution = Some(FitSolution {
        basis: fit.basis,
        beta: sol.beta,
        value,
        a: form.a,
        b: form.b,
        c: form.c,
        regularized: sol.regularized,
        ridge: sol.ridge,
        condition_estimate: sol.condition_estimate,
        direct,
    });
    Ok(out)
}

pub fn hedge_demo(cfg: &RunConfig) -> Result<Summary, Failure> {
    let sim = cfg.simulation()?;
    let h = cfg.hedge()?;
    if h.ladder.is_empty() || h.ladder.contains(&0) {
        return Err(Failure::Config(
            "[hedge] ladder needs positive rebalance counts".into(),
        ));
    }
    h.claim
        .validate()
        .map_err(|e| Failure::Config(format!("[hedge.claim] {e}")))?;
    if !(h.x0 > 0.0 && h.x0.is_finite()) {
        return Err(Failure::Config("[hedge] x0 must be positive".into()));
    }
    if !(h.ratio_step > 0.0) {
        return Err(Failure::Config(
            "[hedge] ratio_step must be positive".into(),
        ));
    }
    let plan = RandomPlan::new(sim.seed, sim.n_paths)?;
    let mut out = Summary::new("hedge-demo", cfg, &sim);
    let mut reports = Vec::new();
    for mode in [VolMode::ConstantVol, VolMode::Lognormal] {
        let p = TwoAssetParams {
            s1: h.s1,
            s2: h.s2,
            rho: h.rho,
            x10: h.x10,
            x20: h.x20,
            mode,
        };
        p.validate()
            .map_err(|e| Failure::Config(format!("[hedge] {e}")))?;
        let tag = match mode {
            VolMode::ConstantVol => "constant-vol",
            VolMode::Lognormal => "lognormal",
        };
        let closed = residual_risk_closed(&p)?;
        let mc = residual_risk_mc(&p, HedgeRule::Optimal, &plan, sim.n_steps)?;
        out.validation.push(Check::mc(
            format!("{tag} residual vs closed form"),
            mc,
            closed,
            h.n_se,
            1e-12 * closed,
        ));
        let unhedged = p.unhedged_risk();
        let unhedged_mc = residual_risk_mc(&p, HedgeRule::Constant(0.0), &plan, sim.n_steps)?;
        out.validation.push(Check::mc(
            format!("{tag} unhedged vs closed form"),
            unhedged_mc,
            unhedged,
            h.n_se,
            1e-12 * unhedged,
        ));
        let mut offsets = Vec::new();
        for &d in &h.offsets {
            let off = residual_risk_mc(&p, HedgeRule::Offset(d), &plan, sim.n_steps)?;
            out.validation.push(Check::flag(
                &format!("{tag} offset {d:?} costs more"),
                off.mean > mc.mean,
                off.mean,
                mc.mean,
                0.0,
            ));
            offsets.push((d, off));
        }

        // constant ratios over a range wide enough for any correlation; the
        // integrand is path independent for constant volatility
        let ratio = optimal_ratio(p.rho, p.s1, p.s2)?;
        let grid_ratio = if mode == VolMode::ConstantVol {
            let half = 2.0 * p.s1 / p.s2;
            let n = (2.0 * half / h.ratio_step).ceil() as usize;
            let small = RandomPlan::new(sim.seed, 2)?;
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=n {
                let phi = -half + k as f64 * h.ratio_step;
                let r = residual_risk_mc(&p, HedgeRule::Constant(phi), &small, sim.n_steps)?;
                if r.mean < best.0 {
                    best = (r.mean, phi);
                }
            }
            out.validation.push(Check::flag(
                "grid-searched ratio",
                (best.1 - ratio).abs() <= h.ratio_step,
                best.1,
                ratio,
                h.ratio_step,
            ));
            best.1
        } else {
            f64::NAN
        };

        let tight = TwoAssetParams {
            rho: (1.0 - 1e-12f64).copysign(if p.rho < 0.0 { -1.0 } else { 1.0 }),
            ..p
        };
        let near_perfect = residual_risk_mc(
            &tight,
            HedgeRule::Optimal,
            &RandomPlan::new(sim.seed, sim.n_paths.min(10_000))?,
            sim.n_steps,
        )?;
        let bound = 1e-6 * tight.unhedged_risk();
        let closed_tight = residual_risk_closed(&tight)?;
        out.validation.push(Check::flag(
            &format!("{tag} residual near perfect correlation"),
            near_perfect.mean < bound && closed_tight < bound,
            near_perfect.mean,
            closed_tight,
            bound,
        ));
        reports.push(TwoAssetReport {
            mode,
            closed,
            mc,
            unhedged,
            unhedged_mc,
            optimal_ratio: ratio,
            grid_ratio,
            offsets,
            near_perfect,
        });
    }

    let mut ladder = h.ladder.clone();
    ladder.sort_unstable();
    ladder.dedup();
    let mut rows = Vec::new();
    for &n in &ladder {
        rows.push((n, delta_hedge_risk(&h.claim, h.x0, n, &plan)?));
    }
    let unhedged = unhedged_claim_risk(&h.claim, h.x0, &plan)?;
    let decreasing = rows.windows(2).all(|w| w[1].1.mean < w[0].1.mean);
    let first = rows[0].1.mean;
    let last = rows[rows.len() - 1].1.mean;
    out.validation.push(Check::flag(
        "ladder decreasing",
        decreasing,
        last,
        first,
        0.0,
    ));
    out.validation.push(Check::flag(
        "ladder reduction",
        first >= 4.0 * last,
        first / last,
        4.0,
        0.0,
    ));
    out.validation.push(Check::flag(
        "ladder below unhedged",
        rows.iter().all(|r| r.1.mean < unhedged.mean),
        first,
        unhedged.mean,
        0.0,
    ));
    let best = rows
        .iter()
        .fold(&rows[0], |b, r| if r.1.mean < b.1.mean { r } else { b });
    out.minimizer = Some(MinimizerOut {
        label: Some(best.0 as f64),
        value: best.1.mean,
    });
    out.scan = rows
        .iter()
        .map(|(n, e)| Row {
            label: Label::Value(*n as f64),
            mean: e.mean,
            std_error: Some(e.std_error),
        })
        .collect();
    out.hedge = Some(HedgeReport {
        two_asset: reports,
        ladder_unhedged: unhedged,
    });
    Ok(out)
}

pub fn validate(cfg: &RunConfig) -> Result<Summary, Failure> {
    let curve = cfg.model()?;
    let sim = cfg.simulation()?;
    let portfolio = cfg.bonds()?;
    let (gompertz, _) = cfg.mortality()?;
    let quad = cfg.quadrature()?;
    let v = cfg.validate_block()?;
    v.claim
        .validate()
        .map_err(|e| Failure::Config(format!("[validate.claim] {e}")))?;
    let grid = make_time_grid(sim.n_steps)?;
    for &t in v.martingale_times.iter().chain(&v.identity_times) {
        if grid.index_of(t).is_none() {
            return Err(Failure::Config(format!(
                "[validate] time {t} is not a node of the {}-step grid",
                sim.n_steps
            )));
        }
    }
    if v.maturities
        .iter()
        .chain(&v.identity_candidates)
        .any(|&t| !(t > 1.0))
    {
        return Err(Failure::Config(
            "[validate] maturities must exceed 1".into(),
        ));
    }
    let mut out = Summary::new("validate", cfg, &sim);
    let paths = unit_paths(&curve, &sim)?;
    let s0 = curve.initial_state();

    for &t in &v.martingale_times {
        let j = grid.index_of(t).unwrap_or(0);
        for &mat in &v.maturities {
            let p0 = discounted_bond(&curve, &s0, mat)?;
            let mut samples = Vec::with_capacity(paths.n_paths());
            for path in 0..paths.n_paths() {
                samples.push(discounted_bond(&curve, &paths.state(path, j), mat)?);
            }
            out.validation.push(Check::mc(
                format!("martingale t={t:?} T={mat:?}"),
                MCEstimate::from_samples(&samples),
                p0,
                v.n_se,
                1e-12 * p0,
            ));
        }
    }

    for (k, &mat) in v.maturities.iter().enumerate() {
        let long = TimeGrid::with_horizon(sim.n_steps, mat)?;
        let plan = RandomPlan::new(sim.seed.wrapping_add(1 + k as u64), sim.n_paths)?;
        let to_mat = simulate(&curve, &long, &plan)?;
        let samples: Vec<f64> = (0..to_mat.n_paths())
            .map(|path| discount_factor(&curve, &to_mat.state(path, sim.n_steps)))
            .collect();
        let price = zero_bond(&curve, &s0, mat)?;
        out.validation.push(Check::mc(
            format!("discount T={mat:?}"),
            MCEstimate::from_samples(&samples),
            price,
            v.n_se,
            1e-12 * price,
        ));
    }

    for &cand in &v.identity_candidates {
        for &t in &v.identity_times {
            let id = variance_identity_check(&curve, &portfolio, cand, t, &paths)?;
            let se = id.lhs.std_error.hypot(id.rhs.std_error);
            let tolerance = v.n_se * se + 1e-12 * id.rhs.mean.abs();
            out.validation.push(Check {
                name: format!("variance identity T={cand:?} t={t:?}"),
                passed: (id.lhs.mean - id.rhs.mean).abs() <= tolerance,
                measured: id.lhs.mean,
                reference: id.rhs.mean,
                tolerance,
                std_error: Some(se),
            });
        }
    }

    let mass_quad = QuadratureSpec {
        dt: v.mass_dt,
        ..quad
    };
    for &x in &v.mass_ages {
        let m = kappa_mass(&gompertz, x, &mass_quad)?;
        out.validation.push(Check::flag(
            &format!("kappa mass x={x:?}"),
            m >= 1.0 - 1e-6 && m <= 1.0,
            m,
            1.0,
            1e-6,
        ));
    }

    let worst = pde_residual(&v.claim, v.pde_step)?;
    out.validation.push(Check::flag(
        "pde residual",
        worst <= v.pde_tol,
        worst,
        0.0,
        v.pde_tol,
    ));

    out.scan = out.validation.iter().map(Check::row).collect();
    Ok(out)
}

/// Largest `|∂ₜf + ½s²x²∂ₓₓf| / f` over a 10 × 10 lattice in `t ∈ (0, 1)`,
/// `x ∈ [0.5, 2]`, by central differences with relative step `rel`.
pub fn pde_residual(claim: &hedgerep::hedging::ZeroRateClaim, rel: f64) -> Result<f64, Failure> {
    let f = |t: f64, x: f64| bs_zero_rate(claim, t, x).map(|r| r.0);
    let s2 = claim.vol * claim.vol;
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let t = (i as f64 + 0.5) / 10.0;
        for j in 0..10 {
            let x = 0.5 * 4f64.powf(j as f64 / 9.0);
            let hx = rel * x;
            let ft = (f(t + rel, x)? - f(t - rel, x)?) / (2.0 * rel);
            let price = f(t, x)?;
            let fxx = (f(t, x + hx)? - 2.0 * price + f(t, x - hx)?) / (hx * hx);
            worst = worst.max((ft + 0.5 * s2 * x * x * fxx).abs() / price);
        }
    }
    Ok(worst)
}
