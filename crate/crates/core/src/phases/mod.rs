//! Connections, dynamical generators and accumulated phase factors.
//!
//! Geometric and dynamical factors are kept as complex logarithms, since for
//! dissipative runs the factors themselves leave the f64 range.

mod aa;
mod chi;
mod superadiabatic;

use crate::linalg::{CVector, C64, I};
use crate::quadrature::cumulative_integral;
use crate::spectral::{DerivativeMethod, EigenTrajectory, LocalDerivatives, TimeGrid};
use crate::{Error, Result};

pub use aa::{
    aa_connection, aa_generator, aa_phase_decomposition, geometric_norm_residuals, norm_law_residuals,
    reconstruction_residuals,
};
pub use chi::{
    chi_generator_invariance, chi_projector_dot, chi_triple, connection_chi, effective_eigenvalue_chi,
    wave_operator_check, ChiFamily, ChiFn, ChiTriple, SectionDerivative, WaveOperatorCheck,
};
pub use superadiabatic::{superadiabatic_system, SuperadiabaticSystem};

/// Relative magnitude below which ⟨φ|φ⟩ or ⟨χ|φ⟩ is treated as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-8;

/// How the accumulated log-factor is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Convention {
    /// ⟨φ*|φ̇⟩ with λ_a.
    Spectral,
    /// ⟨φ|φ̇⟩/⟨φ|φ⟩ with λ_eff.
    Orthogonal,
    /// ⟨χ|φ̇⟩/⟨χ|φ⟩ with λ_χ.
    Chi,
    /// ⟨ψ̲|ψ̲̇⟩/⟨ψ̲|ψ̲⟩ with the Rayleigh quotient of ψ̲.
    NonadiabaticAA,
}

impl Convention {
    pub fn name(&self) -> &'static str {
        match self {
            Convention::Spectral => "spectral",
            Convention::Orthogonal => "orthogonal",
            Convention::Chi => "chi",
            Convention::NonadiabaticAA => "nonadiabatic_AA",
        }
    }
}

/// Accumulated geometric (−∫A) and dynamical (−iT∫λ̃) log-factors.
#[derive(Debug, Clone)]
pub struct PhaseDecomposition {
    pub convention: Convention,
    pub grid: TimeGrid,
    pub t_total: f64,
    pub geometric_log: Vec<C64>,
    pub dynamical_log: Vec<C64>,
    pub total_log: Vec<C64>,
    /// Connection A(s_k).
    pub connection: Vec<C64>,
    /// Dynamical generator λ̃(s_k).
    pub generator: Vec<C64>,
}

impl PhaseDecomposition {
    fn assemble(convention: Convention, grid: TimeGrid, t_total: f64, connection: Vec<C64>, generator: Vec<C64>) -> Self {
        let h = grid.h();
        let geometric_log: Vec<C64> = cumulative_integral(&connection, h).into_iter().map(|z| -z).collect();
        let dynamical_log: Vec<C64> = cumulative_integral(&generator, h)
            .into_iter()
            .map(|z| -I * t_total * z)
            .collect();
        let total_log = geometric_log.iter().zip(&dynamical_log).map(|(g, d)| g + d).collect();
        Self {
            convention,
            grid,
            t_total,
            geometric_log,
            dynamical_log,
            total_log,
            connection,
            generator,
        }
    }

    pub fn len(&self) -> usize {
        self.total_log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total_log.is_empty()
    }
}

/// ⟨φ*_a|φ̇_a⟩ at s_k.
pub fn connection_spectral(eig: &EigenTrajectory, k: usize) -> C64 {
    eig.left(k).inner(eig.right_dot(k))
}

/// ⟨φ_a|φ̇_a⟩/⟨φ_a|φ_a⟩ at s_k.
pub fn connection_orthogonal(eig: &EigenTrajectory, k: usize) -> C64 {
    eig.right(k).inner(eig.right_dot(k)) / eig.right(k).norm_sqr()
}

/// The three expressions of the deviation at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationSample {
    /// ⟨φ*|φ̇⟩ − ⟨φ|φ̇⟩/⟨φ|φ⟩
    pub connection_difference: C64,
    /// ⟨φ*|Ṗₒ|φ⟩
    pub via_orthogonal: C64,
    /// −⟨φ|Ṗₛ|φ⟩/⟨φ|φ⟩
    pub via_spectral: C64,
}

impl DeviationSample {
    fn from_parts(phi: &CVector, phi_star: &CVector, d: &LocalDerivatives) -> Self {
        let n = phi.norm_sqr();
        Self {
            connection_difference: phi_star.inner(&d.right_dot) - phi.inner(&d.right_dot) / n,
            via_orthogonal: d.orthogonal_dot.sandwich(phi_star, phi),
            via_spectral: -d.spectral_dot.sandwich(phi, phi) / n,
        }
    }

    /// Largest pairwise difference of the three expressions.
    pub fn discrepancy(&self) -> f64 {
        let a = (self.connection_difference - self.via_orthogonal).norm();
        let b = (self.connection_difference - self.via_spectral).norm();
        let c = (self.via_orthogonal - self.via_spectral).norm();
        a.max(b).max(c)
    }

    /// Largest modulus of the three expressions.
    pub fn magnitude(&self) -> f64 {
        self.connection_difference
            .norm()
            .max(self.via_orthogonal.norm())
            .max(self.via_spectral.norm())
    }
}

/// Deviation value with its cross-check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationCheck {
    pub sample: DeviationSample,
    pub discrepancy: f64,
    pub budget: f64,
}

impl DeviationCheck {
    pub fn value(&self) -> C64 {
        self.sample.connection_difference
    }

    pub fn passed(&self) -> bool {
        self.discrepancy <= self.budget
    }
}

/// The three deviation expressions from the trajectory's own derivatives.
pub fn deviation_sample(eig: &EigenTrajectory, k: usize) -> DeviationSample {
    DeviationSample::from_parts(eig.right(k), eig.left(k), &eig.local_derivatives(k))
}

/// Deviation with the cross-check budget: in finite-difference mode ten
/// times the h² truncation estimate obtained from the 2h stencil, otherwise
/// round-off only.
pub fn deviation_check(eig: &EigenTrajectory, k: usize) -> Result<DeviationCheck> {
    let sample = deviation_sample(eig, k);
    let scale = sample
        .magnitude()
        .max(connection_spectral(eig, k).norm())
        .max(connection_orthogonal(eig, k).norm())
        .max(1.0);
    let roundoff = 1e-10 * scale;
    let budget = match eig.method() {
        DerivativeMethod::Perturbative => roundoff,
        DerivativeMethod::FiniteDifference => {
            let coarse = eig.finite_difference_derivatives(k, 2)?;
            let coarse = DeviationSample::from_parts(eig.right(k), eig.left(k), &coarse);
            10.0 * coarse.discrepancy() / 4.0 + roundoff
        }
    };
    Ok(DeviationCheck {
        sample,
        discrepancy: sample.discrepancy(),
        budget,
    })
}

/// ⟨φ*|φ̇⟩ − ⟨φ|φ̇⟩/⟨φ|φ⟩, cross-checked against the projector forms.
pub fn deviation(eig: &EigenTrajectory, k: usize) -> Result<C64> {
    let check = deviation_check(eig, k)?;
    if !check.passed() {
        return Err(Error::CrossCheckFailed {
            s: eig.s(k),
            discrepancy: check.discrepancy,
            budget: check.budget,
        });
    }
    Ok(check.value())
}

/// Deviation over the whole grid; points failing the cross-check are
/// masked (`None`).
#[derive(Debug, Clone)]
pub struct DeviationCurve {
    pub grid: TimeGrid,
    pub checks: Vec<DeviationCheck>,
}

impl DeviationCurve {
    pub fn value(&self, k: usize) -> Option<C64> {
        let c = &self.checks[k];
        c.passed().then(|| c.value())
    }

    pub fn masked_count(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    /// Largest |deviation| over unmasked points, with its s.
    pub fn peak(&self) -> Option<(f64, f64)> {
        (0..self.checks.len())
            .filter_map(|k| self.value(k).map(|v| (v.norm(), self.grid.point(k))))
            .max_by(|a, b| a.0.total_cmp(&b.0))
    }
}

pub fn deviation_curve(eig: &EigenTrajectory) -> Result<DeviationCurve> {
    Ok(DeviationCurve {
        grid: eig.grid(),
        checks: (0..eig.len()).map(|k| deviation_check(eig, k)).collect::<Result<_>>()?,
    })
}

/// λ_eff = λ_a + (i/T)⟨φ|Ṗₛ|φ⟩/⟨φ|φ⟩.
/// Ṗₛ enters through the product rule on φ̇_a and φ̇*_a.
pub fn effective_eigenvalue(eig: &EigenTrajectory, t_total: f64, k: usize) -> C64 {
    let phi = eig.right(k);
    eig.eigenvalue(k) + I / t_total * spectral_dot_sandwich(eig, phi, k) / phi.norm_sqr()
}

/// ⟨χ|Ṗₛ|φ_a⟩ = ⟨χ|φ̇_a⟩⟨φ*_a|φ_a⟩ + ⟨χ|φ_a⟩⟨φ̇*_a|φ_a⟩
pub(crate) fn spectral_dot_sandwich(eig: &EigenTrajectory, chi: &CVector, k: usize) -> C64 {
    let (phi, phi_star) = (eig.right(k), eig.left(k));
    chi.inner(eig.right_dot(k)) * phi_star.inner(phi) + chi.inner(phi) * eig.left_dot(k).inner(phi)
}

/// Both sides of iTλ_a + A_s = iTλ_eff + A_o at s_k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensationSample {
    pub spectral_side: C64,
    pub orthogonal_side: C64,
    pub lambda_eff: C64,
}

impl CompensationSample {
    pub fn residual(&self) -> f64 {
        (self.spectral_side - self.orthogonal_side).norm()
    }
}

pub fn compensation_sample(eig: &EigenTrajectory, t_total: f64, k: usize) -> CompensationSample {
    compensation_sample_with(eig, t_total, k, effective_eigenvalue(eig, t_total, k))
}

/// Same as [`compensation_sample`] with an externally supplied λ_eff.
pub fn compensation_sample_with(eig: &EigenTrajectory, t_total: f64, k: usize, lambda_eff: C64) -> CompensationSample {
    let it = I * t_total;
    CompensationSample {
        spectral_side: it * eig.eigenvalue(k) + connection_spectral(eig, k),
        orthogonal_side: it * lambda_eff + connection_orthogonal(eig, k),
        lambda_eff,
    }
}

/// Allowed compensation residual, 1e-12·(|Tλ_a| + 1).
pub fn compensation_bound(eig: &EigenTrajectory, t_total: f64, k: usize) -> f64 {
    1e-12 * (t_total * eig.eigenvalue(k).norm() + 1.0)
}

/// Per-convention decomposition built from the eigen-trajectory.
/// `Orthogonal` pairs A_o with λ_eff; use [`orthogonal_bare_decomposition`]
/// for the pairing with λ_a.
pub fn phase_decomposition(eig: &EigenTrajectory, t_total: f64, convention: Convention, chi: Option<&ChiFamily>) -> Result<PhaseDecomposition> {
    let n = eig.len();
    let (connection, generator): (Vec<C64>, Vec<C64>) = match convention {
        Convention::Spectral => (0..n).map(|k| (connection_spectral(eig, k), eig.eigenvalue(k))).unzip(),
        Convention::Orthogonal => (0..n)
            .map(|k| (connection_orthogonal(eig, k), effective_eigenvalue(eig, t_total, k)))
            .unzip(),
        Convention::Chi => {
            let chi = chi.ok_or_else(|| Error::InvalidArgument("chi convention needs a chi path".into()))?;
            let mut conn = Vec::with_capacity(n);
            let mut gen = Vec::with_capacity(n);
            for k in 0..n {
                conn.push(connection_chi(eig, chi, k)?);
                gen.push(effective_eigenvalue_chi(eig, chi, t_total, k)?);
            }
            (conn, gen)
        }
        Convention::NonadiabaticAA => {
            return Err(Error::InvalidArgument(
                "the nonadiabatic convention is built from a section; use aa_phase_decomposition".into(),
            ))
        }
    };
    Ok(PhaseDecomposition::assemble(convention, eig.grid(), t_total, connection, generator))
}

/// A_o paired with the bare λ_a, which generates ψₒ.
pub fn orthogonal_bare_decomposition(eig: &EigenTrajectory, t_total: f64) -> PhaseDecomposition {
    let n = eig.len();
    let (connection, generator) = (0..n).map(|k| (connection_orthogonal(eig, k), eig.eigenvalue(k))).unzip();
    PhaseDecomposition::assemble(Convention::Orthogonal, eig.grid(), t_total, connection, generator)
}

/// ψₛ, ψₒ and the λ_eff-corrected ψₒ as log-coefficients times φ_a.
#[derive(Debug, Clone)]
pub struct AdiabaticWavefunctions {
    pub spectral: PhaseDecomposition,
    pub orthogonal_bare: PhaseDecomposition,
    pub orthogonal_eff: PhaseDecomposition,
    phi: Vec<CVector>,
}

impl AdiabaticWavefunctions {
    /// (ψₛ(s_k), ψₒ(s_k)) on the linear scale.
    pub fn at(&self, k: usize) -> (CVector, CVector) {
        (
            self.phi[k].scale(self.spectral.total_log[k].exp()),
            self.phi[k].scale(self.orthogonal_bare.total_log[k].exp()),
        )
    }

    pub fn phi(&self, k: usize) -> &CVector {
        &self.phi[k]
    }
}

pub fn adiabatic_wavefunctions(eig: &EigenTrajectory, t_total: f64) -> Result<AdiabaticWavefunctions> {
    Ok(AdiabaticWavefunctions {
        spectral: phase_decomposition(eig, t_total, Convention::Spectral, None)?,
        orthogonal_bare: orthogonal_bare_decomposition(eig, t_total),
        orthogonal_eff: phase_decomposition(eig, t_total, Convention::Orthogonal, None)?,
        phi: (0..eig.len()).map(|k| eig.right(k).clone()).collect(),
    })
}

/// ‖ψ − e^{log_coeff}φ‖/‖e^{log_coeff}φ‖ for ψ = e^{log_scale}·scaled,
/// evaluated without leaving the log scale.
pub fn relative_distance(scaled: &CVector, log_scale: f64, log_coeff: C64, phi: &CVector) -> f64 {
    let shift = (log_scale - log_coeff.re).exp();
    let reference = phi.scale(C64::from_polar(1.0, log_coeff.im));
    (&scaled.scale(C64::new(shift, 0.0)) - &reference).norm() / reference.norm()
}
