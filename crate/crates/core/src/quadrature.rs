//! Uniform-grid quadrature and finite-difference stencils.

use crate::linalg::C64;

/// Second-order derivative of samples `f` at index `k` on spacing `h`:
/// central in the interior, three-point one-sided at the ends.
pub fn fd_weights(n_points: usize, k: usize) -> [(usize, f64); 3] {
    assert!(n_points >= 3, "need at least three samples");
    if k == 0 {
        [(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if k == n_points - 1 {
        [(k, 1.5), (k - 1, -2.0), (k - 2, 0.5)]
    } else {
        [(k - 1, -0.5), (k, 0.0), (k + 1, 0.5)]
    }
}

pub fn fd_derivative(f: &[C64], h: f64, k: usize) -> C64 {
    fd_weights(f.len(), k)
        .iter()
        .map(|&(j, w)| f[j] * w)
        .sum::<C64>()
        / h
}

/// Cumulative trapezoid ∫₀^{s_k} f with the Euler–Maclaurin end correction
/// −h²/12·(f′(s_k) − f′(0)), which lifts the rule to fourth order for smooth f.
pub fn cumulative_integral(f: &[C64], h: f64) -> Vec<C64> {
    let n = f.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    if n < 2 {
        return out;
    }
    let df: Vec<C64> = if n >= 3 {
        (0..n).map(|k| fd_derivative(f, h, k)).collect()
    } else {
        vec![C64::new(0.0, 0.0); n]
    };
    let mut trap = C64::new(0.0, 0.0);
    for k in 1..n {
        trap += (f[k - 1] + f[k]) * (0.5 * h);
        out[k] = trap - (df[k] - df[0]) * (h * h / 12.0);
    }
    out
}

/// Plain cumulative trapezoid.
pub fn cumulative_trapezoid(f: &[C64], h: f64) -> Vec<C64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..f.len() {
        if k > 0 {
            acc += (f[k - 1] + f[k]) * (0.5 * h);
        }
        out.push(acc);
    }
    out
}
