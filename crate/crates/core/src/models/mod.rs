//! Time-dependent Hamiltonian families H(s), s ∈ [0, 1].
//!
//! Energies are in inverse reduced-time units with ħ = 1, so T enters the
//! dynamics only as the prefactor in ψ̇ = −iT H(s) ψ.

mod config;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::linalg::{eigenvalues, CMatrix, LinalgError, C64, ZERO};
use crate::spectral::TimeGrid;

pub use config::{parse_model, EntryTerm, MatrixTable};

/// Number of points on which dissipativity is verified at load time.
pub const DISSIPATIVITY_GRID_POINTS: usize = 512;

/// Default relative threshold on ‖H(1) − H(0)‖ for cyclic analyses.
pub const CYCLICITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown model kind `{0}`")]
    UnknownModelKind(String),
    #[error("H(s) is not dissipative at s = {s}: largest eigenvalue of (H - H^dagger)/2i is {value:.3e}")]
    DissipativityViolation { s: f64, value: f64 },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot read model file {path}: {message}")]
    Io { path: String, message: String },
    #[error("linear algebra failure while validating model: {0}")]
    Linalg(#[from] LinalgError),
}

/// Gaussian envelope exp(−(s − s₀)²/(2σ)), with σ entering linearly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub center: f64,
    pub sigma: f64,
}

impl Gaussian {
    pub fn value(&self, s: f64) -> f64 {
        let d = s - self.center;
        (-d * d / (2.0 * self.sigma)).exp()
    }

    pub fn derivative(&self, s: f64) -> f64 {
        -(s - self.center) / self.sigma * self.value(s)
    }
}

/// Parameters of the bound-state/resonance model
/// H(s) = [[0, Ω(s)], [Ω(s), −iΓ/2]], Ω(s) = w₀Γ·exp(−(s − s₀)²/(2σ)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelPulseParams {
    /// Resonance width Γ.
    pub gamma: f64,
    /// Peak coupling relative to the width, Ω₀/Γ.
    pub w0: f64,
    /// Pulse centre in reduced time.
    pub s0: f64,
    pub sigma: f64,
}

impl Default for TwoLevelPulseParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            w0: 1.0,
            s0: 0.5,
            sigma: 0.16,
        }
    }
}

impl TwoLevelPulseParams {
    pub fn with_w0(self, w0: f64) -> Self {
        Self { w0, ..self }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = |cond: bool, what: &str| {
            if cond {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter(what.to_string()))
            }
        };
        ok(self.gamma.is_finite() && self.gamma > 0.0, "gamma must be > 0")?;
        ok(self.w0.is_finite() && self.w0 >= 0.0, "w0 must be >= 0")?;
        ok(self.sigma.is_finite() && self.sigma > 0.0, "sigma must be > 0")?;
        ok((0.0..=1.0).contains(&self.s0), "s0 must lie in [0, 1]")
    }

    fn envelope(&self) -> Gaussian {
        Gaussian {
            center: self.s0,
            sigma: self.sigma,
        }
    }

    /// Coupling Ω(s).
    pub fn coupling(&self, s: f64) -> f64 {
        self.w0 * self.gamma * self.envelope().value(s)
    }

    pub fn coupling_derivative(&self, s: f64) -> f64 {
        self.w0 * self.gamma * self.envelope().derivative(s)
    }
}

type MatrixFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

#[derive(Clone)]
enum Source {
    TwoLevelPulse(TwoLevelPulseParams),
    Table(MatrixTable),
    Constant(CMatrix),
    Custom {
        evaluate: MatrixFn,
        derivative: Option<MatrixFn>,
    },
}

/// A map s ↦ H(s) with an optional analytic derivative Ḣ(s).
#[derive(Clone)]
pub struct HamiltonianModel {
    name: String,
    dim: usize,
    parameters: Vec<(String, f64)>,
    source: Source,
}

impl fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("parameters", &self.parameters)
            .finish()
    }
}

impl HamiltonianModel {
    /// The bound-state/resonance model driven by a Gaussian pulse.
    pub fn two_level_pulse(params: TwoLevelPulseParams) -> Result<Self, ModelError> {
        params.validate()?;
        Ok(Self {
            name: "two_level_pulse".into(),
            dim: 2,
            parameters: vec![
                ("gamma".into(), params.gamma),
                ("w0".into(), params.w0),
                ("s0".into(), params.s0),
                ("sigma".into(), params.sigma),
            ],
            source: Source::TwoLevelPulse(params),
        })
    }

    pub fn constant(h: CMatrix) -> Self {
        Self {
            name: "constant".into(),
            dim: h.dim(),
            parameters: Vec::new(),
            source: Source::Constant(h),
        }
    }

    pub fn matrix_table(table: MatrixTable) -> Self {
        Self {
            name: "matrix_table".into(),
            dim: table.dim,
            parameters: Vec::new(),
            source: Source::Table(table),
        }
    }

    /// Wraps arbitrary closures; `derivative` enables the perturbative
    /// derivative mode downstream.
    pub fn from_fn<F>(name: &str, dim: usize, evaluate: F, derivative: Option<MatrixFn>) -> Self
    where
        F: Fn(f64) -> CMatrix + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            parameters: Vec::new(),
            source: Source::Custom {
                evaluate: Arc::new(evaluate),
                derivative,
            },
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        load_model(path)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parameters(&self) -> &[(String, f64)] {
        &self.parameters
    }

    pub fn two_level_params(&self) -> Option<TwoLevelPulseParams> {
        match &self.source {
            Source::TwoLevelPulse(p) => Some(*p),
            _ => None,
        }
    }

    pub fn evaluate(&self, s: f64) -> CMatrix {
        match &self.source {
            Source::TwoLevelPulse(p) => {
                let omega = C64::new(p.coupling(s), 0.0);
                CMatrix::from_rows(&[&[ZERO, omega], &[omega, C64::new(0.0, -0.5 * p.gamma)]])
            }
            Source::Table(t) => t.evaluate(s),
            Source::Constant(h) => h.clone(),
            Source::Custom { evaluate, .. } => evaluate(s),
        }
    }

    /// Analytic Ḣ(s), when the model provides one.
    pub fn derivative(&self, s: f64) -> Option<CMatrix> {
        match &self.source {
            Source::TwoLevelPulse(p) => {
                let d = C64::new(p.coupling_derivative(s), 0.0);
                Some(CMatrix::from_rows(&[&[ZERO, d], &[d, ZERO]]))
            }
            Source::Table(t) => Some(t.derivative(s)),
            Source::Constant(h) => Some(CMatrix::zeros(h.dim())),
            Source::Custom { derivative, .. } => derivative.as_ref().map(|d| d(s)),
        }
    }

    pub fn has_analytic_derivative(&self) -> bool {
        !matches!(self.source, Source::Custom { derivative: None, .. })
    }

    /// Central-difference estimate of Ḣ(s) with step `h`, one-sided near the
    /// ends of [0, 1].
    pub fn numeric_derivative(&self, s: f64, h: f64) -> CMatrix {
        let (lo, hi) = if s - h < 0.0 {
            (s, s + h)
        } else if s + h > 1.0 {
            (s - h, s)
        } else {
            (s - h, s + h)
        };
        (&self.evaluate(hi) - &self.evaluate(lo)).scale(C64::new(1.0 / (hi - lo), 0.0))
    }

    /// sup over a uniform interior grid of ‖Ḣ_analytic − Ḣ_central‖_max.
    pub fn derivative_mismatch(&self, n_points: usize, h: f64) -> Option<f64> {
        if !self.has_analytic_derivative() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for k in 0..n_points {
            let s = h + (1.0 - 2.0 * h) * k as f64 / (n_points - 1) as f64;
            let exact = self.derivative(s)?;
            let approx = self.numeric_derivative(s, h);
            worst = worst.max((&exact - &approx).max_abs());
        }
        Some(worst)
    }

    /// ‖H(1) − H(0)‖_F / ‖H(0)‖_F.
    pub fn cyclicity_residual(&self) -> f64 {
        let h0 = self.evaluate(0.0);
        let h1 = self.evaluate(1.0);
        (&h1 - &h0).frobenius_norm() / h0.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    /// Largest eigenvalue of (H − H†)/(2i) over `n_points` samples, with the
    /// s at which it occurs.
    pub fn max_dissipation_eigenvalue(&self, n_points: usize) -> Result<(f64, f64), ModelError> {
        let mut worst = (f64::NEG_INFINITY, 0.0);
        for k in 0..n_points {
            let s = k as f64 / (n_points - 1).max(1) as f64;
            let top = eigenvalues(&self.evaluate(s).anti_hermitian_part())?
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            if top > worst.0 {
                worst = (top, s);
            }
        }
        Ok(worst)
    }

    /// Verifies that H(s) generates a contraction on the validation grid.
    pub fn check_dissipative(&self) -> Result<(), ModelError> {
        let (value, s) = self.max_dissipation_eigenvalue(DISSIPATIVITY_GRID_POINTS)?;
        let scale = self.evaluate(s).frobenius_norm().max(1.0);
        if value > 1e-12 * scale {
            return Err(ModelError::DissipativityViolation { s, value });
        }
        Ok(())
    }
}

/// Reads and validates a model config file.
pub fn load_model(path: impl AsRef<Path>) -> Result<HamiltonianModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let model = parse_model(&text)?;
    model.check_dissipative()?;
    Ok(model)
}

/// min over the grid of min over pairs |λ_b − λ_c|.
pub fn min_eigenvalue_distance(model: &HamiltonianModel, grid: &TimeGrid) -> crate::Result<f64> {
    let mut best = f64::INFINITY;
    for s in grid.points() {
        let h = model.evaluate(s);
        let ev = eigenvalues(&h).map_err(|source| crate::Error::Eigen { s, source })?;
        for i in 0..ev.len() {
            for j in i + 1..ev.len() {
                let gap = (ev[i] - ev[j]).norm();
                let threshold = 1e-8 * h.frobenius_norm();
                if gap < threshold {
                    return Err(crate::Error::Eigen {
                        s,
                        source: LinalgError::NearDegenerate {
                            first: ev[i],
                            second: ev[j],
                            gap,
                            threshold,
                        },
                    });
                }
                best = best.min(gap);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse(w0: f64) -> HamiltonianModel {
        HamiltonianModel::two_level_pulse(TwoLevelPulseParams::default().with_w0(w0)).unwrap()
    }

    #[test]
    fn pulse_peak_equals_omega0() {
        let m = pulse(1.7);
        let h = m.evaluate(0.5);
        assert!((h[(0, 1)].re - 1.7).abs() < 1e-15);
        assert_eq!(h[(0, 1)], h[(1, 0)]);
        assert_eq!(h[(1, 1)], C64::new(0.0, -0.5));
    }

    #[test]
    fn zero_coupling_is_diagonal() {
        let m = pulse(0.0);
        for s in [0.0, 0.3, 0.5, 1.0] {
            let h = m.evaluate(s);
            assert_eq!(h, CMatrix::diagonal(&[ZERO, C64::new(0.0, -0.5)]));
        }
    }

    #[test]
    fn eigenvalues_at_peak_match_characteristic_polynomial() {
        // λ² + (i/2)λ − 1 = 0  =>  λ = −i/4 ± sqrt(15/16)
        let ev = eigenvalues(&pulse(1.0).evaluate(0.5)).unwrap();
        let root = (1.0f64 - 1.0 / 16.0).sqrt();
        assert!((root - 0.968_245_836_551_854_2).abs() < 1e-15);
        assert!((ev[0] - C64::new(-root, -0.25)).norm() < 1e-13);
        assert!((ev[1] - C64::new(root, -0.25)).norm() < 1e-13);
    }

    #[test]
    fn gaussian_symmetry_about_center() {
        let m = pulse(2.0);
        for d in [0.01, 0.1, 0.37, 0.5] {
            assert_eq!(m.evaluate(0.5 + d), m.evaluate(0.5 - d));
        }
        assert_eq!(m.cyclicity_residual(), 0.0);
    }

    #[test]
    fn analytic_derivative_is_second_order_consistent() {
        let m = pulse(3.0);
        let e1 = m.derivative_mismatch(101, 1e-3).unwrap();
        let e2 = m.derivative_mismatch(101, 5e-4).unwrap();
        let ratio = e2 / e1;
        assert!((0.2..0.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn builtin_model_is_dissipative() {
        for w0 in [0.0, 0.5, 1.0, 8.0] {
            let (top, _) = pulse(w0).max_dissipation_eigenvalue(DISSIPATIVITY_GRID_POINTS).unwrap();
            assert!(top <= 1e-12, "w0 = {w0}: {top}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = TwoLevelPulseParams {
            gamma: -1.0,
            ..Default::default()
        };
        assert!(HamiltonianModel::two_level_pulse(bad).is_err());
        let bad = TwoLevelPulseParams {
            s0: 1.5,
            ..Default::default()
        };
        assert!(HamiltonianModel::two_level_pulse(bad).is_err());
    }

    #[test]
    fn min_distance_for_constant_and_decoupled_models() {
        let grid = TimeGrid::new(100).unwrap();
        let c = HamiltonianModel::constant(CMatrix::diagonal(&[ZERO, C64::new(0.0, -0.5)]));
        assert!((min_eigenvalue_distance(&c, &grid).unwrap() - 0.5).abs() < 1e-14);
        let d = pulse(0.0);
        assert!((min_eigenvalue_distance(&d, &grid).unwrap() - 0.5).abs() < 1e-14);
    }

    /// Closed-form oracle: |λ₊ − λ₋| = 2|sqrt(Ω² − Γ²/16)|, minimised over the grid.
    fn closed_form_min_gap(w0: f64, grid: &TimeGrid) -> f64 {
        let p = TwoLevelPulseParams::default().with_w0(w0);
        grid.points()
            .map(|s| {
                let om = p.coupling(s);
                2.0 * C64::new(om * om - p.gamma * p.gamma / 16.0, 0.0).sqrt().norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn min_distance_increases_with_w0() {
        let grid = TimeGrid::new(2000).unwrap();
        let mut last = 0.0;
        for w0 in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let d = min_eigenvalue_distance(&pulse(w0), &grid).unwrap();
            let oracle = closed_form_min_gap(w0, &grid);
            assert!((d - oracle).abs() < 1e-10 * (1.0 + oracle), "w0 {w0}: {d} vs {oracle}");
            assert!(d > last);
            last = d;
        }
    }
}
