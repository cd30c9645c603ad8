use std::f64::consts::PI;

use super::EigenTrajectory;
use crate::linalg::{eigenvalues, CMatrix, CVector, LuFactors, C64};
use crate::models::HamiltonianModel;
use crate::{Error, Result};

pub const DEFAULT_CONTOUR_NODES: usize = 128;

/// Contour radius as a fraction of the distance to the nearest other
/// eigenvalue.
pub const DEFAULT_RADIUS_FRACTION: f64 = 0.5;

/// |⟨χ|φ⟩| below which a chi projector is refused.
pub const CHI_OVERLAP_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorKind {
    Orthogonal,
    Spectral,
    Chi,
}

/// A rank-one projector onto Lin(φ_a) along a chosen complement.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub matrix: CMatrix,
    pub kind: ProjectorKind,
    pub level: usize,
}

impl Projector {
    /// ‖P² − P‖_max
    pub fn idempotency_defect(&self) -> f64 {
        (&(&self.matrix * &self.matrix) - &self.matrix).max_abs()
    }

    /// ‖P − P†‖_max
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - &self.matrix.adjoint()).max_abs()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

/// Pₒ = |φ_a⟩⟨φ_a|/⟨φ_a|φ_a⟩ at s_k.
pub fn orthogonal_projector(traj: &EigenTrajectory, k: usize) -> Projector {
    Projector {
        matrix: traj.orthogonal_matrix(k),
        kind: ProjectorKind::Orthogonal,
        level: traj.level(),
    }
}

/// Pₛ = |φ_a⟩⟨φ*_a| at s_k.
pub fn spectral_projector(traj: &EigenTrajectory, k: usize) -> Projector {
    Projector {
        matrix: traj.spectral_projector_of(traj.level(), k),
        kind: ProjectorKind::Spectral,
        level: traj.level(),
    }
}

/// P_χ = |φ⟩⟨χ|/⟨χ|φ⟩.
pub fn chi_projector(phi: &CVector, chi: &CVector, level: usize, s: f64) -> Result<Projector> {
    let overlap = chi.inner(phi);
    if overlap.norm() < CHI_OVERLAP_THRESHOLD * chi.norm() * phi.norm() {
        return Err(Error::SectionSingular {
            s,
            overlap: overlap.norm(),
        });
    }
    Ok(Projector {
        matrix: CMatrix::outer(phi, chi).scale(overlap.inv()),
        kind: ProjectorKind::Chi,
        level,
    })
}

/// Circle in the complex energy plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub center: C64,
    pub radius: f64,
    pub n_nodes: usize,
}

impl Contour {
    /// Circle centred on eigenvalue `level` of `h` (canonical order) with the
    /// default radius and node count.
    pub fn around(h: &CMatrix, level: usize) -> Result<Self> {
        let ev = eigenvalues(h)?;
        let center = *ev.get(level).ok_or(Error::LevelOutOfRange {
            level,
            dim: ev.len(),
        })?;
        let nearest = ev
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != level)
            .map(|(_, z)| (z - center).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = if nearest.is_finite() {
            DEFAULT_RADIUS_FRACTION * nearest
        } else {
            1.0
        };
        Ok(Self {
            center,
            radius,
            n_nodes: DEFAULT_CONTOUR_NODES,
        })
    }

    pub fn node(&self, j: usize) -> C64 {
        self.center + C64::from_polar(self.radius, 2.0 * PI * j as f64 / self.n_nodes as f64)
    }
}

/// Trapezoidal quadrature of (1/2πi)∮(z − H)⁻¹dz on a counterclockwise
/// circle, which equals |φ_a⟩⟨φ*_a| for the single enclosed eigenvalue.
pub fn riesz_projector_contour(
    model: &HamiltonianModel,
    s: f64,
    contour: &Contour,
) -> Result<Projector> {
    let h = model.evaluate(s);
    riesz_projector_matrix(&h, contour)
}

pub(crate) fn riesz_projector_matrix(h: &CMatrix, contour: &Contour) -> Result<Projector> {
    let ev = eigenvalues(h)?;
    let inside: Vec<usize> = (0..ev.len())
        .filter(|&b| (ev[b] - contour.center).norm() < contour.radius)
        .collect();
    if inside.len() != 1 || contour.n_nodes == 0 || contour.radius <= 0.0 {
        return Err(Error::ContourMisplaced {
            enclosed: inside.len(),
        });
    }
    let n = h.dim();
    let mut acc = CMatrix::zeros(n);
    for j in 0..contour.n_nodes {
        let z = contour.node(j);
        let shifted = CMatrix::from_fn(n, |r, c| {
            let diag = if r == c { z } else { C64::new(0.0, 0.0) };
            diag - h[(r, c)]
        });
        let resolvent = LuFactors::factor(&shifted)
            .and_then(|lu| lu.inverse())
            .map_err(|_| Error::SingularResolvent { z })?;
        acc = &acc + &resolvent.scale(z - contour.center);
    }
    Ok(Projector {
        matrix: acc.scale(C64::new(1.0 / contour.n_nodes as f64, 0.0)),
        kind: ProjectorKind::Spectral,
        level: inside[0],
    })
}
