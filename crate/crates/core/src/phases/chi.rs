use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{spectral_dot_sandwich, SINGULARITY_THRESHOLD};
use crate::linalg::{CMatrix, CVector, C64, I};
use crate::models::HamiltonianModel;
use crate::propagation::CyclicSectionData;
use crate::quadrature::fd_weights;
use crate::spectral::{DerivativeMethod, EigenTrajectory};
use crate::{Error, Result};

/// χ(s) and dχ/ds.
pub type ChiFn = Arc<dyn Fn(f64) -> (CVector, CVector) + Send + Sync>;

#[derive(Clone)]
enum ChiSource {
    LeftEigvec,
    RightEigvec,
    Polynomial(Vec<CVector>),
    Custom(ChiFn),
}

/// A reference path χ(s) defining the projector P_χ = |φ_a⟩⟨χ|/⟨χ|φ_a⟩.
#[derive(Clone)]
pub struct ChiFamily {
    name: String,
    source: ChiSource,
}

impl fmt::Debug for ChiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChiFamily").field("name", &self.name).finish()
    }
}

/// Relative size of the s-dependent part of a random χ.
const RANDOM_PERTURBATION: f64 = 0.3;
const RANDOM_DEGREE: usize = 3;

impl ChiFamily {
    /// χ = φ*_a, so P_χ = Pₛ.
    pub fn left_eigvecs() -> Self {
        Self {
            name: "left_eigvec".into(),
            source: ChiSource::LeftEigvec,
        }
    }

    /// χ = φ_a, so P_χ = Pₒ.
    pub fn right_eigvecs() -> Self {
        Self {
            name: "right_eigvec".into(),
            source: ChiSource::RightEigvec,
        }
    }

    /// χ(s) = Σ_j c_j s^j.
    pub fn polynomial(name: &str, coefficients: Vec<CVector>) -> Result<Self> {
        let dim = coefficients.first().map(CVector::dim).unwrap_or(0);
        if dim == 0 || coefficients.iter().any(|c| c.dim() != dim) {
            return Err(Error::InvalidArgument("polynomial chi needs coefficients of one nonzero dimension".into()));
        }
        Ok(Self {
            name: name.into(),
            source: ChiSource::Polynomial(coefficients),
        })
    }

    /// Fixed unit vector plus a cubic perturbation, drawn from `seed`.
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |amp: f64| {
            CVector::from_vec(
                (0..dim)
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * amp)
                    .collect(),
            )
        };
        let base = draw(1.0).normalized();
        let mut coefficients = vec![base];
        for _ in 0..RANDOM_DEGREE {
            coefficients.push(draw(RANDOM_PERTURBATION / (dim as f64).sqrt()));
        }
        Self {
            name: format!("random_{seed}"),
            source: ChiSource::Polynomial(coefficients),
        }
    }

    pub fn from_fn<F>(name: &str, f: F) -> Self
    where
        F: Fn(f64) -> (CVector, CVector) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            source: ChiSource::Custom(Arc::new(f)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// (χ, χ̇) at s_k of `eig`.
    pub fn at(&self, eig: &EigenTrajectory, k: usize) -> (CVector, CVector) {
        match &self.source {
            ChiSource::LeftEigvec => (eig.left(k).clone(), eig.left_dot(k).clone()),
            ChiSource::RightEigvec => (eig.right(k).clone(), eig.right_dot(k).clone()),
            ChiSource::Polynomial(c) => polynomial_at(c, eig.s(k)),
            ChiSource::Custom(f) => f(eig.s(k)),
        }
    }
}

fn polynomial_at(coefficients: &[CVector], s: f64) -> (CVector, CVector) {
    let dim = coefficients[0].dim();
    let mut value = CVector::zeros(dim);
    let mut deriv = CVector::zeros(dim);
    for c in coefficients.iter().rev() {
        deriv = deriv.scale(C64::new(s, 0.0)) + value.clone();
        value = value.scale(C64::new(s, 0.0)) + c.clone();
    }
    (value, deriv)
}

/// ⟨χ|φ⟩, refused when relatively smaller than the threshold.
fn chi_overlap(chi: &CVector, phi: &CVector, s: f64) -> Result<C64> {
    let ov = chi.inner(phi);
    let rel = ov.norm() / (chi.norm() * phi.norm());
    if rel.is_nan() || rel < SINGULARITY_THRESHOLD {
        return Err(Error::SectionSingular { s, overlap: rel });
    }
    Ok(ov)
}

/// ⟨χ|φ̇_a⟩/⟨χ|φ_a⟩ at s_k.
pub fn connection_chi(eig: &EigenTrajectory, chi: &ChiFamily, k: usize) -> Result<C64> {
    let (x, _) = chi.at(eig, k);
    let ov = chi_overlap(&x, eig.right(k), eig.s(k))?;
    Ok(x.inner(eig.right_dot(k)) / ov)
}

/// λ_χ = λ_a + (i/T)⟨χ|Ṗₛ|φ_a⟩/⟨χ|φ_a⟩.
pub fn effective_eigenvalue_chi(eig: &EigenTrajectory, chi: &ChiFamily, t_total: f64, k: usize) -> Result<C64> {
    let (x, _) = chi.at(eig, k);
    let phi = eig.right(k);
    let ov = chi_overlap(&x, phi, eig.s(k))?;
    Ok(eig.eigenvalue(k) + I / t_total * spectral_dot_sandwich(eig, &x, k) / ov)
}

fn chi_projector_matrix(eig: &EigenTrajectory, chi: &ChiFamily, k: usize) -> Result<CMatrix> {
    let (x, _) = chi.at(eig, k);
    let phi = eig.right(k);
    let ov = chi_overlap(&x, phi, eig.s(k))?;
    Ok(CMatrix::outer(phi, &x).scale(ov.inv()))
}

/// dP_χ/ds at s_k: differences of the P_χ sequence in finite-difference
/// mode, the product rule otherwise.
pub fn chi_projector_dot(eig: &EigenTrajectory, chi: &ChiFamily, k: usize) -> Result<CMatrix> {
    match eig.method() {
        DerivativeMethod::FiniteDifference => {
            let h = eig.grid().h();
            let mut out = CMatrix::zeros(eig.dim());
            for (j, w) in fd_weights(eig.len(), k) {
                if w != 0.0 {
                    out = &out + &chi_projector_matrix(eig, chi, j)?.scale(C64::new(w / h, 0.0));
                }
            }
            Ok(out)
        }
        DerivativeMethod::Perturbative => {
            let (x, x_dot) = chi.at(eig, k);
            let phi = eig.right(k);
            let phi_dot = eig.right_dot(k);
            let c = chi_overlap(&x, phi, eig.s(k))?;
            let c_dot = x_dot.inner(phi) + x.inner(phi_dot);
            let sym = &CMatrix::outer(phi_dot, &x) + &CMatrix::outer(phi, &x_dot);
            Ok(&sym.scale(c.inv()) - &CMatrix::outer(phi, &x).scale(c_dot / (c * c)))
        }
    }
}

/// The three expressions of A_s − A_χ at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiTriple {
    /// ⟨φ*|φ̇⟩ − ⟨χ|φ̇⟩/⟨χ|φ⟩
    pub connection_difference: C64,
    /// ⟨φ*|Ṗ_χ|φ⟩
    pub via_chi_projector: C64,
    /// −⟨χ|Ṗₛ|φ⟩/⟨χ|φ⟩
    pub via_spectral: C64,
}

impl ChiTriple {
    pub fn discrepancy(&self) -> f64 {
        let a = (self.connection_difference - self.via_chi_projector).norm();
        let b = (self.connection_difference - self.via_spectral).norm();
        let c = (self.via_chi_projector - self.via_spectral).norm();
        a.max(b).max(c)
    }
}

pub fn chi_triple(eig: &EigenTrajectory, chi: &ChiFamily, k: usize) -> Result<ChiTriple> {
    let (x, _) = chi.at(eig, k);
    let phi = eig.right(k);
    let ov = chi_overlap(&x, phi, eig.s(k))?;
    let a_s = eig.left(k).inner(eig.right_dot(k));
    let a_chi = x.inner(eig.right_dot(k)) / ov;
    let pchi_dot = chi_projector_dot(eig, chi, k)?;
    let ps_dot = eig.spectral_projector_dot_of(eig.level(), k);
    Ok(ChiTriple {
        connection_difference: a_s - a_chi,
        via_chi_projector: pchi_dot.sandwich(eig.left(k), phi),
        via_spectral: -ps_dot.sandwich(&x, phi) / ov,
    })
}

/// Which estimate of dψ̲/ds enters the combined generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionDerivative {
    /// From the equation of motion.
    Analytic,
    /// Central differences of the stored section.
    FiniteDifference,
}

/// iT⟨χ|H|ψ̲⟩/⟨χ|ψ̲⟩ + ⟨χ|ψ̲̇⟩/⟨χ|ψ̲⟩ at s_k; independent of χ.
pub fn chi_generator_invariance(
    section: &CyclicSectionData,
    chi: &CVector,
    model: &HamiltonianModel,
    k: usize,
    derivative: SectionDerivative,
) -> Result<C64> {
    let s = section.grid().point(k);
    let psi = section.section(k);
    let ov = chi_overlap(chi, psi, s)?;
    let dot = match derivative {
        SectionDerivative::Analytic => section.section_dot(k).clone(),
        SectionDerivative::FiniteDifference => section.section_dot_fd(k),
    };
    let hpsi = model.evaluate(s).mul_vec(psi);
    Ok((I * section.t_total() * chi.inner(&hpsi) + chi.inner(&dot)) / ov)
}

/// Residuals of the wave-operator relations for Ω = P_χ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveOperatorCheck {
    /// |⟨φ*|PₛṖ_χ|φ⟩ − ⟨φ*|Ṗ_χ|φ⟩|
    pub residual: f64,
    /// ‖PₛP_χ − P_χ‖_max, i.e. Ω⁻¹Ω = P_χ
    pub inverse_defect: f64,
    /// ‖P_χPₛ − Pₛ‖_max
    pub left_inverse_defect: f64,
}

impl WaveOperatorCheck {
    pub fn worst(&self) -> f64 {
        self.residual.max(self.inverse_defect).max(self.left_inverse_defect)
    }
}

pub fn wave_operator_check(eig: &EigenTrajectory, chi: &ChiFamily, k: usize) -> Result<WaveOperatorCheck> {
    let p_chi = chi_projector_matrix(eig, chi, k)?;
    let p_chi_dot = chi_projector_dot(eig, chi, k)?;
    let ps = eig.spectral_projector_of(eig.level(), k);
    let (phi, phi_star) = (eig.right(k), eig.left(k));
    let lhs = (&ps * &p_chi_dot).sandwich(phi_star, phi);
    let rhs = p_chi_dot.sandwich(phi_star, phi);
    Ok(WaveOperatorCheck {
        residual: (lhs - rhs).norm(),
        inverse_defect: (&(&ps * &p_chi) - &p_chi).max_abs(),
        left_inverse_defect: (&(&p_chi * &ps) - &ps).max_abs(),
    })
}
