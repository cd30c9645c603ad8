//! Finite-time dynamics of dissipative, non-Hermitian Hamiltonians and the
//! split of the evolution into dynamical and geometric factors under the
//! spectral, orthogonal, χ-projector and Aharonov–Anandan conventions.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex matrices, LU solves, biorthogonal eigensystems.
//! * [`models`]: time-dependent Hamiltonian families and the config loader.
//! * [`spectral`]: eigenvector continuation along a time grid, projectors,
//!   Riesz contour integrals and derivative estimates.
//! * [`propagation`]: adaptive Runge–Kutta integration of (i/T)ψ̇ = Hψ and
//!   the local section used for cyclic evolutions.
//! * [`phases`]: connections, the deviation between them, λ_eff, the first
//!   superadiabatic renormalization and the χ-projected generators.
//! * [`audit`]: the consistency checks shared by the CLI and the test suites.

pub mod audit;
pub mod error;
pub mod linalg;
pub mod models;
pub mod phases;
pub mod propagation;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, EigenSystem, C64};
pub use models::{HamiltonianModel, TwoLevelPulseParams};
pub use phases::{Convention, PhaseDecomposition};
pub use propagation::{CyclicSectionData, EvolutionOperator, WavefunctionTrajectory};
pub use spectral::{DerivativeMethod, EigenTrajectory, Projector, ProjectorKind, TimeGrid};
