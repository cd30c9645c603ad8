//! Dormand–Prince 5(4) with Hairer's dense output, specialised to linear
//! right-hand sides so that the state can be renormalised after every step.

use crate::linalg::C64;
use crate::spectral::TimeGrid;
use crate::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    /// Absolute tolerance on the renormalised (unit-norm) state.
    pub atol: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl IntegratorOptions {
    /// `rtol = tol`, `atol = tol/100`.
    pub fn from_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol * 1e-2,
            ..Self::default()
        }
    }
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            min_step: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Samples of the solution on the grid: scaled states and their log scales,
/// so that y(s_k) = exp(log_scale[k])·states[k].
pub(crate) struct Solution {
    pub states: Vec<Vec<C64>>,
    pub log_scales: Vec<f64>,
    pub stats: IntegratorStats,
}

fn l2(y: &[C64]) -> f64 {
    y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Integrates y' = f(s, y) over [0, 1] for a right-hand side that is linear
/// in y. `f(s, y, out)` must overwrite `out`.
pub(crate) fn integrate<F>(mut f: F, y0: &[C64], grid: TimeGrid, opts: &IntegratorOptions) -> Result<Solution>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let mut stats = IntegratorStats::default();
    let mut states = Vec::with_capacity(grid.len());
    let mut log_scales = Vec::with_capacity(grid.len());
    states.push(y0.to_vec());
    log_scales.push(0.0);

    let norm0 = l2(y0);
    if norm0 == 0.0 || !norm0.is_finite() {
        return Err(Error::InvalidArgument("initial state must have finite nonzero norm".into()));
    }
    let mut y: Vec<C64> = y0.iter().map(|z| z / norm0).collect();
    let mut log_scale = norm0.ln();

    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n]);
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    let mut y1 = vec![C64::new(0.0, 0.0); n];
    let mut rc: [Vec<C64>; 5] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n]);

    let mut s = 0.0;
    f(s, &y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, s, &y, &k[0], opts, &mut stats);
    let mut next_out = 1;
    let mut last_rejected = false;

    while next_out < grid.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { s, step: h });
        }
        if h < opts.min_step {
            return Err(Error::StepUnderflow { s, step: h });
        }
        let final_step = s + h >= 1.0 - 1e-15;
        if final_step {
            h = 1.0 - s;
        }

        stage(&mut tmp, &y, h, &k, &[(0, A21)]);
        f(s + C2 * h, &tmp, &mut k[1]);
        stage(&mut tmp, &y, h, &k, &[(0, A31), (1, A32)]);
        f(s + C3 * h, &tmp, &mut k[2]);
        stage(&mut tmp, &y, h, &k, &[(0, A41), (1, A42), (2, A43)]);
        f(s + C4 * h, &tmp, &mut k[3]);
        stage(&mut tmp, &y, h, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        f(s + C5 * h, &tmp, &mut k[4]);
        stage(&mut tmp, &y, h, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        f(s + h, &tmp, &mut k[5]);
        stage(&mut y1, &y, h, &k, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)]);
        f(s + h, &y1, &mut k[6]);
        stats.evaluations += 6;

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(y1[i].norm());
            err_sq += (e.norm() / sc).powi(2);
        }
        let err = (err_sq / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::StepUnderflow { s, step: h });
        }

        if err <= 1.0 {
            stats.accepted += 1;
            let s_new = if final_step { 1.0 } else { s + h };
            // dense output coefficients on the current scale
            for i in 0..n {
                let dy = y1[i] - y[i];
                let bspl = k[0][i] * h - dy;
                rc[0][i] = y[i];
                rc[1][i] = dy;
                rc[2][i] = bspl;
                rc[3][i] = dy - k[6][i] * h - bspl;
                rc[4][i] = (k[0][i] * D1 + k[2][i] * D3 + k[3][i] * D4 + k[4][i] * D5 + k[5][i] * D6 + k[6][i] * D7) * h;
            }
            while next_out < grid.len() && grid.point(next_out) <= s_new + 1e-15 {
                let sk = grid.point(next_out);
                let out = if next_out == grid.len() - 1 && final_step {
                    y1.clone()
                } else {
                    let theta = ((sk - s) / h).clamp(0.0, 1.0);
                    let theta1 = 1.0 - theta;
                    (0..n)
                        .map(|i| {
                            rc[0][i]
                                + (rc[1][i]
                                    + (rc[2][i] + (rc[3][i] + rc[4][i] * theta1) * theta) * theta1)
                                    * theta
                        })
                        .collect()
                };
                states.push(out);
                log_scales.push(log_scale);
                next_out += 1;
            }

            let norm = l2(&y1);
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::StepUnderflow { s: s_new, step: h });
            }
            let inv = 1.0 / norm;
            for i in 0..n {
                y[i] = y1[i] * inv;
                k[0][i] = k[6][i] * inv;
            }
            log_scale += norm.ln();
            s = s_new;

            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            last_rejected = true;
        }
    }

    Ok(Solution {
        states,
        log_scales,
        stats,
    })
}

fn stage(out: &mut [C64], y: &[C64], h: f64, k: &[Vec<C64>; 7], terms: &[(usize, f64)]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for &(j, a) in terms {
            acc += k[j][i] * a;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Starting step from the size of y' and a trial Euler step.
fn initial_step<F>(f: &mut F, s: f64, y: &[C64], f0: &[C64], opts: &IntegratorOptions, stats: &mut IntegratorStats) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len();
    let scale: Vec<f64> = y.iter().map(|z| opts.atol + opts.rtol * z.norm()).collect();
    let rms = |v: &dyn Fn(usize) -> f64| ((0..n).map(|i| v(i).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(&|i| y[i].norm() / scale[i]);
    let d1 = rms(&|i| f0[i].norm() / scale[i]);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(1.0);
    let y1: Vec<C64> = (0..n).map(|i| y[i] + f0[i] * h0).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); n];
    f(s + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let d2 = rms(&|i| (f1[i] - f0[i]).norm() / scale[i]) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(1.0).max(opts.min_step * 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(rate: C64) -> impl FnMut(f64, &[C64], &mut [C64]) {
        move |_, y, out| {
            for i in 0..y.len() {
                out[i] = rate * y[i];
            }
        }
    }

    #[test]
    fn exponential_solution_with_dense_output() {
        let rate = C64::new(-3.0, 40.0);
        let grid = TimeGrid::new(37).unwrap();
        let sol = integrate(decay(rate), &[C64::new(1.0, 0.0)], grid, &IntegratorOptions::default()).unwrap();
        for (k, s) in grid.points().enumerate() {
            let got = sol.states[k][0] * sol.log_scales[k].exp();
            let exact = (rate * s).exp();
            assert!((got - exact).norm() < 1e-8 * exact.norm(), "s = {s}");
        }
    }

    #[test]
    fn log_scale_survives_extreme_decay() {
        // e^{-2000} underflows f64; the log scale carries it.
        let grid = TimeGrid::new(10).unwrap();
        let sol = integrate(decay(C64::new(-2000.0, 0.0)), &[C64::new(1.0, 0.0)], grid, &IntegratorOptions::default()).unwrap();
        let last = sol.states.len() - 1;
        let log_norm = sol.states[last][0].norm().ln() + sol.log_scales[last];
        assert!((log_norm + 2000.0).abs() < 1e-6, "{log_norm}");
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let rate = C64::new(0.0, 60.0);
        let grid = TimeGrid::new(5).unwrap();
        let err = |tol: f64| {
            let sol = integrate(decay(rate), &[C64::new(1.0, 0.0)], grid, &IntegratorOptions::from_tol(tol)).unwrap();
            (sol.states[5][0] * sol.log_scales[5].exp() - rate.exp()).norm()
        };
        assert!(err(1e-10) < err(1e-6));
    }

    #[test]
    fn step_floor_reports_underflow() {
        let opts = IntegratorOptions {
            min_step: 0.5,
            ..Default::default()
        };
        let err = integrate(decay(C64::new(0.0, 500.0)), &[C64::new(1.0, 0.0)], TimeGrid::new(4).unwrap(), &opts);
        assert!(matches!(err, Err(Error::StepUnderflow { .. })));
    }
}
