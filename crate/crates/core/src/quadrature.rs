//! Composite trapezoid helpers.

/// Trapezoid weights for the nodes `xs` (any spacing, ascending).
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = xs[i] - xs[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    w
}

/// Weights of `∫ g(t) (1 − t) dt` over the nodes, evaluated by trapezoid.
pub fn time_weights(times: &[f64]) -> Vec<f64> {
    trapezoid_weights(times)
        .into_iter()
        .zip(times)
        .map(|(w, t)| w * (1.0 - t))
        .collect()
}

/// Uniform nodes `lo, lo + h, ...` ending exactly at `hi`; the last step is
/// shortened when `(hi − lo) / h` is not an integer.
pub fn uniform_nodes(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    assert!(hi >= lo && h > 0.0);
    let n = ((hi - lo) / h - 1e-9).ceil().max(0.0) as usize;
    let mut xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    xs.push(hi);
    if xs.len() == 1 && hi > lo {
        xs.insert(0, lo);
    }
    xs
}

/// `∫_lo^hi f` by composite trapezoid on [`uniform_nodes`].
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, h: f64) -> f64 {
    let xs = uniform_nodes(lo, hi, h);
    trapezoid_weights(&xs)
        .iter()
        .zip(&xs)
        .map(|(w, &x)| w * f(x))
        .sum()
}
