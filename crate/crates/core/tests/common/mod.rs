//! Brute-force reference evaluations shared by the integration tests. They
//! only use the public pointwise functions (one curve call per maturity,
//! explicit loops), never the batched scan kernels.
#![allow(dead_code)]

use hedgerep::curve::{discounted_bond, h_norm_sq, vol_loading, G2ppParams, VolLoading};
use hedgerep::mortality::{choose_t_max, kappa, policy_value_t0, GompertzParams, QuadratureSpec};
use hedgerep::stochastic::{make_time_grid, simulate, RandomPlan};

pub fn fig1_bonds() -> Vec<(f64, f64)> {
    vec![(0.3, 2.5), (0.5, 5.0), (0.2, 8.0)]
}

pub fn fig2_policies() -> Vec<(f64, f64)> {
    vec![
        (1.0, 30.0),
        (1.5, 40.0),
        (2.0, 50.0),
        (1.5, 60.0),
        (1.0, 70.0),
    ]
}

fn time_weights(n_steps: usize) -> Vec<f64> {
    let h = 1.0 / n_steps as f64;
    (0..=n_steps)
        .map(|j| {
            let t = j as f64 * h;
            let w = if j == 0 || j == n_steps { 0.5 * h } else { h };
            w * (1.0 - t)
        })
        .collect()
}

/// `(mean, std_error)` per candidate maturity.
pub fn brute_bond_scan(
    curve: &G2ppParams,
    bonds: &[(f64, f64)],
    candidates: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    let grid = make_time_grid(n_steps).unwrap();
    let sim = simulate(curve, &grid, &RandomPlan::new(seed, n_paths).unwrap()).unwrap();
    let s0 = curve.initial_state();
    let value: f64 = bonds
        .iter()
        .map(|&(a, t)| a * discounted_bond(curve, &s0, t).unwrap())
        .sum();
    let alphas: Vec<f64> = candidates
        .iter()
        .map(|&t| value / discounted_bond(curve, &s0, t).unwrap())
        .collect();
    let tw = time_weights(n_steps);
    let mut sums = vec![(0.0, 0.0); candidates.len()];
    for path in 0..n_paths {
        let mut acc = vec![0.0; candidates.len()];
        for (j, &w) in tw.iter().enumerate() {
            let st = sim.state(path, j);
            let mut e = VolLoading::default();
            for &(a, t) in bonds {
                e = e + vol_loading(curve, &st, t).unwrap().scale(a);
            }
            for (c, &t) in candidates.iter().enumerate() {
                let d = e - vol_loading(curve, &st, t).unwrap().scale(alphas[c]);
                acc[c] += w * h_norm_sq(curve.rho, d).unwrap();
            }
        }
        for (s, v) in sums.iter_mut().zip(acc) {
            s.0 += v;
            s.1 += v * v;
        }
    }
    finish(sums, n_paths)
}

fn finish(sums: Vec<(f64, f64)>, n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    sums.into_iter()
        .map(|(s, q)| {
            let m = s / nf;
            let var = ((q / nf - m * m) * nf / (nf - 1.0)).max(0.0);
            (m, (var / nf).sqrt())
        })
        .collect()
}

pub fn brute_life_scan(
    curve: &G2ppParams,
    mortality: &GompertzParams,
    policies: &[(f64, f64)],
    candidates: &[f64],
    quad: &QuadratureSpec,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    let youngest = candidates
        .iter()
        .chain(policies.iter().map(|p| &p.1))
        .copied()
        .fold(f64::INFINITY, f64::min);
    let t_max = choose_t_max(mortality, youngest, quad.tail_eps, quad.dt).unwrap();
    let n_nodes = ((t_max - 1.0) / quad.dt).round() as usize;
    let nodes: Vec<f64> = (0..=n_nodes).map(|i| 1.0 + i as f64 * quad.dt).collect();
    let node_w: Vec<f64> = (0..=n_nodes)
        .map(|i| {
            if i == 0 || i == n_nodes {
                0.5 * quad.dt
            } else {
                quad.dt
            }
        })
        .collect();

    let value: f64 = policies
        .iter()
        .map(|&(a, x)| a * policy_value_t0(mortality, curve, x, quad).unwrap())
        .sum();
    let mut weights = vec![vec![0.0; nodes.len()]; candidates.len()];
    for (c, &x) in candidates.iter().enumerate() {
        let alpha = value / policy_value_t0(mortality, curve, x, quad).unwrap();
        for (n, &t) in nodes.iter().enumerate() {
            let exposure: f64 = policies
                .iter()
                .map(|&(a, xk)| a * kappa(mortality, xk, t).unwrap())
                .sum();
            weights[c][n] = node_w[n] * (exposure - alpha * kappa(mortality, x, t).unwrap());
        }
    }

    let grid = make_time_grid(n_steps).unwrap();
    let sim = simulate(curve, &grid, &RandomPlan::new(seed, n_paths).unwrap()).unwrap();
    let tw = time_weights(n_steps);
    let mut sums = vec![(0.0, 0.0); candidates.len()];
    let mut loads = vec![VolLoading::default(); nodes.len()];
    for path in 0..n_paths {
        let mut acc = vec![0.0; candidates.len()];
        for (j, &w) in tw.iter().enumerate() {
            let st = sim.state(path, j);
            for (l, &t) in loads.iter_mut().zip(&nodes) {
                // the one-year node is reached as a limit from above
                *l = vol_loading(curve, &st, t.max(1.0 + 1e-12)).unwrap();
            }
            for c in 0..candidates.len() {
                let mut g = VolLoading::default();
                for (l, &k) in loads.iter().zip(&weights[c]) {
                    g = g + l.scale(k);
                }
                acc[c] += w * h_norm_sq(curve.rho, g).unwrap();
            }
        }
        for (s, v) in sums.iter_mut().zip(acc) {
            s.0 += v;
            s.1 += v * v;
        }
    }
    finish(sums, n_paths)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, whole: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (l, r) = (simpson(f, a, m), simpson(f, m, b));
    if depth == 0 || (l + r - whole).abs() < 15.0 * tol {
        return l + r + (l + r - whole) / 15.0;
    }
    adaptive(f, a, m, tol / 2.0, l, depth - 1) + adaptive(f, m, b, tol / 2.0, r, depth - 1)
}

/// Adaptive Simpson with absolute tolerance 1e-13.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    adaptive(f, a, b, 1e-13, simpson(f, a, b), 40)
}
