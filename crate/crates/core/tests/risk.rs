mod common;

use common::{brute_bond_scan, brute_life_scan, fig1_bonds, fig2_policies};
use hedgerep::curve::{discounted_bond, G2ppParams};
use hedgerep::mortality::{AgeDomain, GompertzParams, QuadratureSpec};
use hedgerep::risk::{
    bond_alpha, bond_risk_scan, label_grid, life_alpha, life_risk_scan, replication_risk,
    variance_identity_check, BondPortfolio, PolicyPortfolio,
};
use hedgerep::stats::MCEstimate;
use hedgerep::stochastic::{make_time_grid, simulate, RandomPlan, TimeGrid};
use hedgerep::FactorPathSet;

fn paths(curve: &G2ppParams, n_steps: usize, n_paths: usize, seed: u64) -> FactorPathSet {
    simulate(
        curve,
        &make_time_grid(n_steps).unwrap(),
        &RandomPlan::new(seed, n_paths).unwrap(),
    )
    .unwrap()
}

fn bond_grid(portfolio: &BondPortfolio) -> Vec<f64> {
    label_grid(1.1, 10.0, 0.1, &portfolio.maturities()).unwrap()
}

fn age_grid(portfolio: &PolicyPortfolio) -> Vec<f64> {
    label_grid(20.0, 80.0, 0.5, &portfolio.ages()).unwrap()
}

fn fig1() -> BondPortfolio {
    BondPortfolio::new(fig1_bonds()).unwrap()
}

fn fig2() -> PolicyPortfolio {
    PolicyPortfolio::new(fig2_policies(), &AgeDomain::default()).unwrap()
}

fn assert_close(a: f64, b: f64, rel: f64) {
    assert!((a - b).abs() <= rel * a.abs().max(b.abs()), "{a} vs {b}");
}

#[test]
fn single_bond_scan_vanishes_at_own_maturity() {
    let curve = G2ppParams::default();
    let sim = paths(&curve, 100, 10_000, 1);
    for &(a, t) in &[(1.3, 4.0), (0.7, 2.5), (2.0, 9.3)] {
        let port = BondPortfolio::new(vec![(a, t)]).unwrap();
        let scan = bond_risk_scan(&curve, &port, &bond_grid(&port), &sim).unwrap();
        let own = scan.value_at(t).unwrap();
        assert_eq!(own.mean, 0.0);
        assert_eq!(own.std_error, 0.0);
        assert_eq!(scan.minimizer.label, t);
        assert_eq!(scan.minimizer.value, 0.0);
        assert!(scan.points.iter().all(|p| p.mean >= 0.0));
    }
}

#[test]
fn single_policy_scan_vanishes_at_own_age() {
    let curve = G2ppParams::default();
    let sim = paths(&curve, 50, 2_000, 2);
    let g = GompertzParams::default();
    let quad = QuadratureSpec::default();
    for &(a, x) in &[(3.0, 45.0), (1.0, 62.5)] {
        let port = PolicyPortfolio::new(vec![(a, x)], &AgeDomain::default()).unwrap();
        let scan = life_risk_scan(&curve, &g, &port, &age_grid(&port), &quad, &sim).unwrap();
        let own = scan.value_at(x).unwrap();
        assert_eq!(own.mean, 0.0);
        assert_eq!(scan.minimizer.label, x);
        assert!(scan.points.iter().all(|p| p.mean >= 0.0));
    }
}

#[test]
fn bond_scan_matches_pointwise_evaluation_on_shared_paths() {
    let curve = G2ppParams::default();
    let port = fig1();
    let grid = bond_grid(&port);
    let (n_paths, n_steps, seed) = (400, 20, 9);
    let scan =
        bond_risk_scan(&curve, &port, &grid, &paths(&curve, n_steps, n_paths, seed)).unwrap();
    let brute = brute_bond_scan(&curve, &fig1_bonds(), &grid, n_paths, n_steps, seed);
    for (p, b) in scan.points.iter().zip(&brute) {
        assert_close(p.mean, b.0, 1e-9);
        assert_close(p.std_error, b.1, 1e-6);
    }
}

#[test]
fn life_scan_matches_pointwise_evaluation_on_shared_paths() {
    let curve = G2ppParams::default();
    let g = GompertzParams::default();
    let quad = QuadratureSpec::default();
    let port = fig2();
    let grid = label_grid(20.0, 80.0, 2.5, &port.ages()).unwrap();
    let (n_paths, n_steps, seed) = (100, 10, 4);
    let scan = life_risk_scan(
        &curve,
        &g,
        &port,
        &grid,
        &quad,
        &paths(&curve, n_steps, n_paths, seed),
    )
    .unwrap();
    let brute = brute_life_scan(
        &curve,
        &g,
        &fig2_policies(),
        &grid,
        &quad,
        n_paths,
        n_steps,
        seed,
    );
    for (p, b) in scan.points.iter().zip(&brute) {
        assert_close(p.mean, b.0, 1e-9);
    }
}

#[test]
fn bond_scan_minimizer_interior_and_confirmed_by_oracle() {
    let curve = G2ppParams::default();
    let port = fig1();
    let grid = bond_grid(&port);
    let scan = bond_risk_scan(&curve, &port, &grid, &paths(&curve, 100, 10_000, 5)).unwrap();
    let m = scan.minimizer;
    assert!(m.label > 2.5 && m.label < 8.0, "{m:?}");
    assert!(m.value >= 0.0 && m.value.is_finite());

    let brute = brute_bond_scan(&curve, &fig1_bonds(), &grid, 100_000, 10, 6);
    let k = (0..brute.len())
        .min_by(|&a, &b| brute[a].0.total_cmp(&brute[b].0))
        .unwrap();
    assert!(
        (grid[k] - m.label).abs() <= 0.1 + 1e-12,
        "oracle {} vs {m:?}",
        grid[k]
    );
}

#[test]
fn life_scan_minimizer_interior() {
    let curve = G2ppParams::default();
    let g = GompertzParams::default();
    let quad = QuadratureSpec::default();
    let port = fig2();
    let scan = life_risk_scan(
        &curve,
        &g,
        &port,
        &age_grid(&port),
        &quad,
        &paths(&curve, 50, 2_000, 12),
    )
    .unwrap();
    let m = scan.minimizer;
    assert!(m.label > 30.0 && m.label < 70.0, "{m:?}");
    assert!(scan
        .points
        .iter()
        .all(|p| p.mean.is_finite() && p.mean >= 0.0));
}

#[test]
fn refined_minimizer_tracks_dense_grid() {
    let curve = G2ppParams::default();
    let port = fig1();
    let sim = paths(&curve, 50, 4_000, 13);
    let coarse = bond_risk_scan(&curve, &port, &bond_grid(&port), &sim).unwrap();
    let dense_grid = label_grid(1.1, 10.0, 0.01, &[]).unwrap();
    let dense = bond_risk_scan(&curve, &port, &dense_grid, &sim).unwrap();
    let best = dense
        .points
        .iter()
        .min_by(|a, b| a.mean.total_cmp(&b.mean))
        .unwrap();
    assert!((coarse.minimizer.label - best.label).abs() <= 0.1);
    assert!(
        coarse.minimizer.value
            <= coarse
                .points
                .iter()
                .map(|p| p.mean)
                .fold(f64::INFINITY, f64::min)
    );
}

#[test]
fn scan_grid_stability() {
    let curve = G2ppParams::default();
    let port = fig1();
    let grid = label_grid(1.5, 10.0, 0.5, &[]).unwrap();
    let a = bond_risk_scan(&curve, &port, &grid, &paths(&curve, 50, 10_000, 20)).unwrap();
    let b = bond_risk_scan(&curve, &port, &grid, &paths(&curve, 100, 10_000, 21)).unwrap();
    for (p, q) in a.points.iter().zip(&b.points) {
        let z = p.estimate().z_score(&q.estimate());
        assert!(z < 3.0, "T={}: {:?} vs {:?}", p.label, p, q);
    }
}

#[test]
fn variance_identity_holds() {
    let curve = G2ppParams::default();
    let port = fig1();
    let sim = paths(&curve, 50, 100_000, 30);
    for &t in &[0.5, 1.0] {
        for &cand in &[2.0, 5.0, 9.0] {
            let v = variance_identity_check(&curve, &port, cand, t, &sim).unwrap();
            assert!(v.passes(3.0), "t={t} T={cand}: {v:?}");
        }
    }
}

#[test]
fn variance_identity_trivial_cases() {
    let curve = G2ppParams::default();
    let sim = paths(&curve, 10, 1_000, 31);
    let v = variance_identity_check(&curve, &fig1(), 5.0, 0.0, &sim).unwrap();
    assert_eq!(v.lhs.mean, 0.0);
    assert_eq!(v.rhs.mean, 0.0);
    let single = BondPortfolio::new(vec![(2.0, 6.0)]).unwrap();
    for &t in &[0.3, 1.0] {
        let v = variance_identity_check(&curve, &single, 6.0, t, &sim).unwrap();
        assert_eq!(v.lhs.mean, 0.0);
        assert_eq!(v.rhs.mean, 0.0);
    }
    assert!(variance_identity_check(&curve, &single, 6.0, 0.35, &sim).is_err());
}

#[test]
fn bond_alpha_against_discount_oracle() {
    let curve = G2ppParams::default();
    let bonds = fig1_bonds();
    let closed = bond_alpha(&curve, &fig1(), 5.0).unwrap();
    let s0 = curve.initial_state();
    let direct: f64 = bonds
        .iter()
        .map(|&(a, t)| a * discounted_bond(&curve, &s0, t).unwrap())
        .sum::<f64>()
        / discounted_bond(&curve, &s0, 5.0).unwrap();
    assert_close(closed, direct, 1e-14);

    // ratio estimator E[Σ αₖ D(Tₖ)] / E[D(5)] on simulated discount factors
    let grid = TimeGrid::with_horizon(16, 8.0).unwrap();
    let sim = simulate(&curve, &grid, &RandomPlan::new(3, 100_000).unwrap()).unwrap();
    let phi = |t: f64| curve.phi1 * t + 0.5 * curve.phi2 * t * t;
    let d = |path: usize, t: f64| {
        let j = grid.index_of(t).unwrap();
        (-sim.y1(path, j) - sim.y2(path, j) - phi(t)).exp()
    };
    let n = sim.n_paths();
    let num: Vec<f64> = (0..n)
        .map(|p| bonds.iter().map(|&(a, t)| a * d(p, t)).sum())
        .collect();
    let den: Vec<f64> = (0..n).map(|p| d(p, 5.0)).collect();
    let (mn, md) = (
        MCEstimate::from_samples(&num).mean,
        MCEstimate::from_samples(&den).mean,
    );
    let ratio = mn / md;
    let resid: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(x, y)| (x - ratio * y) / md)
        .collect();
    let se = MCEstimate::from_samples(&resid).std_error;
    assert!(
        (ratio - closed).abs() < 3.0 * se,
        "{ratio} vs {closed} (se {se})"
    );
}

#[test]
fn life_alpha_examples() {
    let curve = G2ppParams::default();
    let g = GompertzParams::default();
    let quad = QuadratureSpec::default();
    let d = AgeDomain::default();
    let single = PolicyPortfolio::new(vec![(2.5, 47.0)], &d).unwrap();
    assert_eq!(life_alpha(&curve, &g, &single, 47.0, &quad).unwrap(), 2.5);

    let port = fig2();
    let a = life_alpha(&curve, &g, &port, 50.0, &quad).unwrap();
    let a2 = life_alpha(&curve, &g, &port.scaled(2.0), 50.0, &quad).unwrap();
    assert_close(a2, 2.0 * a, 1e-15);

    let half = QuadratureSpec {
        dt: quad.dt / 2.0,
        ..quad
    };
    let ah = life_alpha(&curve, &g, &port, 50.0, &half).unwrap();
    assert_close(a, ah, 1e-5);
}

#[test]
fn replication_risk_agrees_with_scan() {
    let curve = G2ppParams::default();
    let port = fig1();
    let sim = paths(&curve, 20, 500, 40);
    let scan = bond_risk_scan(&curve, &port, &[3.0, 6.0], &sim).unwrap();
    for p in &scan.points {
        let alpha = bond_alpha(&curve, &port, p.label).unwrap();
        let r = replication_risk(&curve, &port, &[(alpha, p.label)], &sim).unwrap();
        assert_close(r.mean, p.mean, 1e-12);
    }
    let unhedged = replication_risk(&curve, &port, &[], &sim).unwrap();
    assert!(scan.points.iter().all(|p| p.mean < unhedged.mean));
}

#[test]
fn scans_reject_mismatched_paths() {
    let curve = G2ppParams::default();
    let other = G2ppParams { s1: 0.2, ..curve };
    let sim = paths(&other, 10, 10, 1);
    assert!(bond_risk_scan(&curve, &fig1(), &[3.0], &sim).is_err());
    let long = simulate(
        &curve,
        &TimeGrid::with_horizon(10, 2.0).unwrap(),
        &RandomPlan::new(1, 10).unwrap(),
    )
    .unwrap();
    assert!(bond_risk_scan(&curve, &fig1(), &[3.0], &long).is_err());
}

#[test]
fn scans_are_independent_of_pool_size() {
    let curve = G2ppParams::default();
    let g = GompertzParams::default();
    let quad = QuadratureSpec::default();
    let sim = paths(&curve, 20, 300, 50);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                (
                    bond_risk_scan(&curve, &fig1(), &bond_grid(&fig1()), &sim).unwrap(),
                    life_risk_scan(&curve, &g, &fig2(), &age_grid(&fig2()), &quad, &sim).unwrap(),
                )
            })
    };
    assert_eq!(run(1), run(3));
}
