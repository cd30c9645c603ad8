use crate::linalg::LinalgError;
use crate::models::ModelError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("eigensolver failed at s = {s}: {source}")]
    Eigen { s: f64, source: LinalgError },

    #[error("lost track of level {level} at s = {s} (best overlap {overlap:.3})")]
    TrackingLost { level: usize, s: f64, overlap: f64 },

    #[error("contour encloses {enclosed} eigenvalues, expected exactly one")]
    ContourMisplaced { enclosed: usize },

    #[error("resolvent is singular at contour node z = {z}")]
    SingularResolvent { z: crate::linalg::C64 },

    #[error("integration step underflow at s = {s} (step {step:.3e}); try a looser tolerance or a smaller T")]
    StepUnderflow { s: f64, step: f64 },

    #[error("section is singular at s = {s}: |<ref|psi>| = {overlap:.3e}")]
    SectionSingular { s: f64, overlap: f64 },

    #[error("model is not cyclic: ||H(1) - H(0)|| = {residual:.3e} exceeds {threshold:.3e}")]
    NotCyclic { residual: f64, threshold: f64 },

    #[error("deviation cross-check failed at s = {s}: discrepancy {discrepancy:.3e} above budget {budget:.3e}")]
    CrossCheckFailed { s: f64, discrepancy: f64, budget: f64 },

    #[error("level {level} out of range for dimension {dim}")]
    LevelOutOfRange { level: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of the spectral continuation (degeneracies,
    /// exceptional points, lost branches).
    pub fn is_spectral(&self) -> bool {
        match self {
            Error::TrackingLost { .. } | Error::Eigen { .. } => true,
            Error::Linalg(e) => matches!(
                e,
                LinalgError::NearDegenerate { .. }
                    | LinalgError::DefectivePair { .. }
                    | LinalgError::NoConvergence { .. }
            ),
            _ => false,
        }
    }
}
