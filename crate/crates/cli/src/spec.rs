use std::path::PathBuf;

use adiaphase::models::load_model;
use adiaphase::propagation::DEFAULT_TOL;
use adiaphase::spectral::DEFAULT_STEPS;
use adiaphase::{HamiltonianModel, TwoLevelPulseParams};

use crate::CliError;

pub const MIN_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Builtin(TwoLevelPulseParams),
    File(PathBuf),
}

/// Everything one CLI invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: ModelSource,
    pub n_steps: usize,
    pub t_list: Vec<f64>,
    pub w0_list: Option<Vec<f64>>,
    pub level: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub tol: f64,
    /// Test hook: shifts λ_eff before the compensation check.
    pub corrupt_lambda_eff: bool,
}

/// One model of a run; `w0` is set for builtin models.
#[derive(Clone)]
pub struct ModelCase {
    pub w0: Option<f64>,
    pub model: HamiltonianModel,
}

impl ExperimentSpec {
    pub fn builtin(params: TwoLevelPulseParams, t_list: Vec<f64>, out: impl Into<PathBuf>) -> Self {
        Self {
            model: ModelSource::Builtin(params),
            n_steps: DEFAULT_STEPS,
            t_list,
            w0_list: None,
            level: 1,
            out: out.into(),
            seed: 0,
            tol: DEFAULT_TOL,
            corrupt_lambda_eff: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.t_list.is_empty() {
            return bad("T list is empty".into());
        }
        if let Some(t) = self.t_list.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return bad(format!("T = {t} is not a positive duration"));
        }
        if self.n_steps < MIN_STEPS {
            return bad(format!("--steps {} is below the minimum of {MIN_STEPS}", self.n_steps));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("--tol {} must be positive", self.tol));
        }
        if let Some(list) = &self.w0_list {
            if list.is_empty() {
                return bad("w0 list is empty".into());
            }
            if matches!(self.model, ModelSource::File(_)) {
                return bad("--w0-list applies to the builtin model only".into());
            }
        }
        Ok(())
    }

    /// Durations sorted ascending without repeats.
    pub fn durations(&self) -> Vec<f64> {
        sorted_unique(&self.t_list)
    }

    /// Models of the run, sorted by w0.
    pub fn model_cases(&self) -> Result<Vec<ModelCase>, CliError> {
        match &self.model {
            ModelSource::File(path) => Ok(vec![ModelCase {
                w0: None,
                model: load_model(path)?,
            }]),
            ModelSource::Builtin(params) => {
                let list = match &self.w0_list {
                    Some(list) => sorted_unique(list),
                    None => vec![params.w0],
                };
                list.into_iter()
                    .map(|w0| {
                        Ok(ModelCase {
                            w0: Some(w0),
                            model: HamiltonianModel::two_level_pulse(params.with_w0(w0))?,
                        })
                    })
                    .collect()
            }
        }
    }

    /// Output directory of one model case.
    pub fn case_dir(&self, w0: Option<f64>) -> PathBuf {
        match (&self.w0_list, w0) {
            (Some(_), Some(w0)) => self.out.join(format!("w0_{w0}")),
            _ => self.out.clone(),
        }
    }
}

fn sorted_unique(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
