//! The JSON run report. Keys are emitted in sorted order.

use std::collections::BTreeMap;

use adiaphase::audit::CheckResult;
use adiaphase::C64;
use serde::{Serialize, Serializer};

use crate::output::MASKED;

/// A float that serializes as `masked` when not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(MASKED)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complex {
    pub re: Num,
    pub im: Num,
}

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Self {
            re: Num(z.re),
            im: Num(z.im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecRecord {
    pub model: String,
    pub n_steps: usize,
    pub t_list: Vec<Num>,
    pub w0_list: Option<Vec<Num>>,
    pub level: usize,
    pub seed: u64,
    pub tol: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSummary {
    pub peak: Option<Num>,
    pub peak_s: Option<Num>,
    pub masked_points: usize,
}

/// T-independent data of one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRecord {
    pub w0: Option<Num>,
    pub name: String,
    pub parameters: BTreeMap<String, Num>,
    pub derivative_method: String,
    pub min_eigenvalue_distance: Num,
    pub model_cyclicity_residual: Num,
    pub deviation: DeviationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionRecord {
    pub convention: String,
    pub geometric_log_end: Complex,
    pub dynamical_log_end: Complex,
    pub total_log_end: Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdiabaticRecord {
    pub psi_s_error_end: Num,
    pub psi_o_error_end: Num,
    pub psi_o_eff_error_end: Num,
    pub psi_s_error_sup: Num,
    pub psi_o_error_sup: Num,
    pub psi_o_eff_error_sup: Num,
}

/// One simulated (w0, T) point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub w0: Option<Num>,
    pub t_total: Num,
    pub conventions: Vec<ConventionRecord>,
    pub adiabatic: AdiabaticRecord,
    pub lambda_eff_max_shift: Num,
    pub compensation_residual: Num,
    pub section_cyclicity_residual: Num,
    pub log_mu: Complex,
    pub final_norm: Num,
    pub trajectory_file: String,
    pub phases_file: String,
}

/// One (w0, T) point of a T-scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub w0: Option<Num>,
    pub t_total: Num,
    pub adiabatic: AdiabaticRecord,
    pub intertwining_end: Num,
    pub aa_orthogonal_gap: Num,
    pub superadiabatic_spectral_gap: Num,
    pub superadiabatic_orthogonal_gap: Num,
    pub superadiabatic_eigen_residual: Num,
    pub superadiabatic_spectral_correction: Num,
    pub superadiabatic_orthogonal_correction: Num,
    pub section_cyclicity_residual: Num,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Both values sit at the integrator floor; the ratio carries no order.
    Floor,
}

impl Status {
    pub fn failed(self) -> bool {
        self == Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRecord {
    pub quantity: String,
    pub w0: Option<Num>,
    pub t: Num,
    pub t_doubled: Num,
    pub value: Num,
    pub value_doubled: Num,
    pub ratio: Num,
    pub window: [Num; 2],
    pub status: Status,
}

/// Peaks of the deviation against the minimal eigenvalue distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingRecord {
    /// w0 values by increasing min|E₁ − E₂|.
    pub w0_by_distance: Vec<Num>,
    pub peaks: Vec<Num>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub w0: Option<Num>,
    pub name: String,
    pub residual: Num,
    pub threshold: Num,
    pub status: Status,
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(w0: Option<f64>, c: &CheckResult) -> Self {
        Self {
            w0: w0.map(Num),
            name: c.name.clone(),
            residual: Num(c.residual),
            threshold: Num(c.threshold),
            status: if c.passed { Status::Pass } else { Status::Fail },
            note: c.note.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self.w0 {
            Some(Num(w0)) => format!("{} (w0 = {w0})", self.name),
            None => self.name.clone(),
        }
    }
}

/// Output of one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub spec: SpecRecord,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<SimulationRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scan: Vec<ScanRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ratio_tests: Vec<RatioRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<OrderingRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckRecord>,
    pub files: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, spec: SpecRecord) -> Self {
        Self {
            command: command.into(),
            spec,
            models: Vec::new(),
            records: Vec::new(),
            scan: Vec::new(),
            ratio_tests: Vec::new(),
            ordering: None,
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Name of the first failed check or verdict, in report order.
    pub fn first_failure(&self) -> Option<String> {
        if let Some(c) = self.checks.iter().find(|c| c.status.failed()) {
            return Some(c.label());
        }
        if let Some(r) = self.ratio_tests.iter().find(|r| r.status.failed()) {
            let w0 = r.w0.map(|Num(w)| format!(", w0 = {w}")).unwrap_or_default();
            return Some(format!("{} (T = {} -> {}{w0}, ratio {:.4})", r.quantity, r.t.0, r.t_doubled.0, r.ratio.0));
        }
        match &self.ordering {
            Some(o) if o.status.failed() => Some("deviation_peak_ordering".into()),
            _ => None,
        }
    }
}
