//! Integration of ψ̇ = −iT H(s) ψ on s ∈ [0, 1], the evolution operator and
//! the local section used by the cyclic (Aharonov–Anandan) analysis.
//!
//! States are stored renormalised, together with the logarithm of the
//! discarded scale, so that strongly decaying runs never underflow.

mod dopri;
mod section;

use crate::linalg::{CMatrix, CVector, C64};
use crate::models::HamiltonianModel;
use crate::spectral::TimeGrid;
use crate::{Error, Result};

pub use dopri::{IntegratorOptions, IntegratorStats};
pub use section::{build_local_section, build_local_section_with, CyclicSectionData, SectionOptions};

pub const DEFAULT_TOL: f64 = 1e-10;

/// ψ(s_k) for one duration T.
#[derive(Debug, Clone)]
pub struct WavefunctionTrajectory {
    grid: TimeGrid,
    t_total: f64,
    tol: f64,
    states: Vec<CVector>,
    log_scales: Vec<f64>,
    stats: IntegratorStats,
}

impl WavefunctionTrajectory {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    /// ψ(s_k) up to the positive factor exp(log_scale(k)).
    pub fn scaled_state(&self, k: usize) -> &CVector {
        &self.states[k]
    }

    pub fn log_scale(&self, k: usize) -> f64 {
        self.log_scales[k]
    }

    /// ψ(s_k); may underflow for long strongly dissipative runs.
    pub fn state(&self, k: usize) -> CVector {
        self.states[k].scale(C64::new(self.log_scales[k].exp(), 0.0))
    }

    /// ln‖ψ(s_k)‖
    pub fn log_norm(&self, k: usize) -> f64 {
        self.states[k].norm().ln() + self.log_scales[k]
    }

    pub fn norm(&self, k: usize) -> f64 {
        self.log_norm(k).exp()
    }
}

/// U_T(s_k, 0) for one duration T, stored like [`WavefunctionTrajectory`].
#[derive(Debug, Clone)]
pub struct EvolutionOperator {
    grid: TimeGrid,
    t_total: f64,
    matrices: Vec<CMatrix>,
    log_scales: Vec<f64>,
}

impl EvolutionOperator {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn scaled_matrix(&self, k: usize) -> &CMatrix {
        &self.matrices[k]
    }

    pub fn log_scale(&self, k: usize) -> f64 {
        self.log_scales[k]
    }

    pub fn matrix(&self, k: usize) -> CMatrix {
        self.matrices[k].scale(C64::new(self.log_scales[k].exp(), 0.0))
    }
}

fn check_duration(t_total: f64, tol: f64) -> Result<()> {
    if !(t_total.is_finite() && t_total > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be > 0, got {t_total}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    Ok(())
}

/// Integrates ψ̇ = −iT H(s)ψ from `psi0`, sampling on `grid`.
pub fn propagate(
    model: &HamiltonianModel,
    t_total: f64,
    psi0: &CVector,
    grid: TimeGrid,
    tol: f64,
) -> Result<WavefunctionTrajectory> {
    propagate_with(model, t_total, psi0, grid, &IntegratorOptions::from_tol(tol))
}

pub fn propagate_with(
    model: &HamiltonianModel,
    t_total: f64,
    psi0: &CVector,
    grid: TimeGrid,
    opts: &IntegratorOptions,
) -> Result<WavefunctionTrajectory> {
    check_duration(t_total, opts.rtol)?;
    if psi0.dim() != model.dim() {
        return Err(Error::InvalidArgument(format!(
            "initial state has dimension {}, model has {}",
            psi0.dim(),
            model.dim()
        )));
    }
    if psi0.norm() == 0.0 {
        return Err(Error::InvalidArgument("initial state must be nonzero".into()));
    }
    let n = model.dim();
    let minus_it = C64::new(0.0, -t_total);
    let rhs = |s: f64, y: &[C64], out: &mut [C64]| {
        let h = model.evaluate(s);
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += h[(i, j)] * y[j];
            }
            out[i] = minus_it * acc;
        }
    };
    let sol = dopri::integrate(rhs, psi0.as_slice(), grid, opts)?;
    let mut states: Vec<CVector> = sol.states.into_iter().map(CVector::from_vec).collect();
    states[0] = psi0.clone();
    Ok(WavefunctionTrajectory {
        grid,
        t_total,
        tol: opts.rtol,
        states,
        log_scales: sol.log_scales,
        stats: sol.stats,
    })
}

/// Propagates the identity; all columns share one scale factor.
pub fn evolution_operator(
    model: &HamiltonianModel,
    t_total: f64,
    grid: TimeGrid,
    tol: f64,
) -> Result<EvolutionOperator> {
    let opts = IntegratorOptions::from_tol(tol);
    check_duration(t_total, tol)?;
    let n = model.dim();
    let minus_it = C64::new(0.0, -t_total);
    // row-major n×n state
    let rhs = |s: f64, y: &[C64], out: &mut [C64]| {
        let h = model.evaluate(s);
        for i in 0..n {
            for c in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += h[(i, j)] * y[j * n + c];
                }
                out[i * n + c] = minus_it * acc;
            }
        }
    };
    let identity = CMatrix::identity(n);
    let sol = dopri::integrate(rhs, identity.as_slice(), grid, &opts)?;
    let mut matrices: Vec<CMatrix> = sol.states.into_iter().map(CMatrix::from_row_major).collect();
    matrices[0] = identity;
    Ok(EvolutionOperator {
        grid,
        t_total,
        matrices,
        log_scales: sol.log_scales,
    })
}

#[cfg(test)]
mod tests;
