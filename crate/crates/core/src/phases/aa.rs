use super::{Convention, PhaseDecomposition};
use crate::linalg::C64;
use crate::models::HamiltonianModel;
use crate::propagation::{CyclicSectionData, WavefunctionTrajectory};
use crate::{Error, Result};

/// ⟨ψ̲|ψ̲̇⟩/⟨ψ̲|ψ̲⟩ at s_k.
pub fn aa_connection(section: &CyclicSectionData, k: usize) -> C64 {
    let psi = section.section(k);
    psi.inner(section.section_dot(k)) / psi.norm_sqr()
}

/// ⟨ψ̲|H|ψ̲⟩/⟨ψ̲|ψ̲⟩ at s_k.
pub fn aa_generator(section: &CyclicSectionData, model: &HamiltonianModel, k: usize) -> C64 {
    let psi = section.section(k);
    model.evaluate(section.grid().point(k)).sandwich(psi, psi) / psi.norm_sqr()
}

/// Geometric and dynamical log-factors of ψ = e^{total_log}ψ̲.
pub fn aa_phase_decomposition(section: &CyclicSectionData, model: &HamiltonianModel, t_total: f64) -> Result<PhaseDecomposition> {
    if model.dim() != section.section(0).dim() {
        return Err(Error::InvalidArgument("model and section dimensions differ".into()));
    }
    let n = section.len();
    let connection = (0..n).map(|k| aa_connection(section, k)).collect();
    let generator = (0..n).map(|k| aa_generator(section, model, k)).collect();
    Ok(PhaseDecomposition::assemble(
        Convention::NonadiabaticAA,
        section.grid(),
        t_total,
        connection,
        generator,
    ))
}

/// |‖ψ(s_k)‖²/‖ψ(0)‖² · e^{−2Re dynamical_log} − 1| per grid point.
pub fn norm_law_residuals(decomposition: &PhaseDecomposition, traj: &WavefunctionTrajectory) -> Vec<f64> {
    let base = traj.log_norm(0);
    decomposition
        .dynamical_log
        .iter()
        .enumerate()
        .map(|(k, d)| (2.0 * (traj.log_norm(k) - base) - 2.0 * d.re).exp_m1().abs())
        .collect()
}

/// |Re geometric_log + ½ ln(⟨ψ̲|ψ̲⟩/⟨ψ̲(0)|ψ̲(0)⟩)| per grid point.
pub fn geometric_norm_residuals(decomposition: &PhaseDecomposition, section: &CyclicSectionData) -> Vec<f64> {
    let base = section.section(0).norm_sqr().ln();
    decomposition
        .geometric_log
        .iter()
        .enumerate()
        .map(|(k, g)| (g.re + 0.5 * (section.section(k).norm_sqr().ln() - base)).abs())
        .collect()
}

/// |e^{total_log}·f − 1| per grid point, i.e. the relative mismatch between
/// ψ and e^{total_log}ψ̲.
pub fn reconstruction_residuals(decomposition: &PhaseDecomposition, section: &CyclicSectionData) -> Vec<f64> {
    decomposition
        .total_log
        .iter()
        .enumerate()
        .map(|(k, t)| exp_m1_norm(t + section.log_f(k)))
        .collect()
}

/// |e^z − 1| without cancellation for small z.
fn exp_m1_norm(z: C64) -> f64 {
    // e^z − 1 = (e^re − 1)e^{i im} + (e^{i im} − 1)
    let rotated = C64::from_polar(z.re.exp_m1(), z.im);
    let half = (0.5 * z.im).sin();
    (rotated + C64::new(-2.0 * half * half, z.im.sin())).norm()
}
