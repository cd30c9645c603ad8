use std::path::PathBuf;

use adiaphase::propagation::DEFAULT_TOL;
use adiaphase::spectral::DEFAULT_STEPS;
use adiaphase::TwoLevelPulseParams;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::spec::{ExperimentSpec, ModelSource};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "adiaphase", version, about = "Geometric and dynamical phases of dissipative driven systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate and decompose the evolution for every (w0, T).
    Simulate(RunArgs),
    /// Scan durations and test the 1/T and 1/T² laws.
    Tscan(RunArgs),
    /// Audit the consistency relations; exit 1 on the first failure.
    Consistency(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    TwoLevel,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Model config file.
    #[arg(long, conflicts_with_all = ["builtin", "gamma", "w0", "s0", "sigma", "w0_list"])]
    pub model: Option<PathBuf>,
    /// Builtin model (default two-level).
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub w0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub s0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Number of grid intervals on [0, 1].
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Comma-separated durations.
    #[arg(long = "T", value_delimiter = ',', allow_negative_numbers = true)]
    pub t: Vec<f64>,
    /// Comma-separated couplings; one output subdirectory each.
    #[arg(long = "w0-list", value_delimiter = ',', allow_negative_numbers = true)]
    pub w0_list: Vec<f64>,
    /// Tracked level, by canonical index at s = 0.
    #[arg(long, default_value_t = 1)]
    pub level: usize,
    #[arg(long, default_value = "adiaphase-out")]
    pub out: PathBuf,
    /// Seed of the random reference paths.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Integrator tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL, allow_negative_numbers = true)]
    pub tol: f64,
    #[arg(long, hide = true)]
    pub corrupt_lambda_eff: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Tscan(_) => "tscan",
            Command::Consistency(_) => "consistency",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a) | Command::Tscan(a) | Command::Consistency(a) => a,
        }
    }

    fn default_durations(&self) -> Vec<f64> {
        match self {
            Command::Simulate(_) => vec![100.0],
            Command::Tscan(_) => vec![100.0, 200.0, 400.0, 800.0],
            Command::Consistency(_) => vec![100.0, 400.0],
        }
    }

    pub fn to_spec(&self) -> Result<ExperimentSpec, CliError> {
        let a = self.args();
        let model = match &a.model {
            Some(path) => ModelSource::File(path.clone()),
            None => {
                let d = TwoLevelPulseParams::default();
                let params = TwoLevelPulseParams {
                    gamma: a.gamma.unwrap_or(d.gamma),
                    w0: a.w0.unwrap_or(d.w0),
                    s0: a.s0.unwrap_or(d.s0),
                    sigma: a.sigma.unwrap_or(d.sigma),
                };
                params.validate()?;
                ModelSource::Builtin(params)
            }
        };
        Ok(ExperimentSpec {
            model,
            n_steps: a.steps,
            t_list: if a.t.is_empty() { self.default_durations() } else { a.t.clone() },
            w0_list: (!a.w0_list.is_empty()).then(|| a.w0_list.clone()),
            level: a.level,
            out: a.out.clone(),
            seed: a.seed,
            tol: a.tol,
            corrupt_lambda_eff: a.corrupt_lambda_eff,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("adiaphase").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn lists_split_on_commas() {
        let cli = parse(&["tscan", "--T", "100,200", "--w0-list", "0.5,1", "--steps", "300"]);
        let spec = cli.command.to_spec().unwrap();
        assert_eq!(spec.t_list, [100.0, 200.0]);
        assert_eq!(spec.w0_list, Some(vec![0.5, 1.0]));
        assert_eq!(spec.n_steps, 300);
    }

    #[test]
    fn defaults_follow_the_command() {
        let spec = parse(&["consistency"]).command.to_spec().unwrap();
        assert_eq!(spec.t_list, [100.0, 400.0]);
        assert_eq!(spec.level, 1);
        assert!(matches!(spec.model, ModelSource::Builtin(p) if p == TwoLevelPulseParams::default()));
    }

    #[test]
    fn model_file_excludes_builtin_flags() {
        let r = Cli::try_parse_from(["adiaphase", "simulate", "--model", "m.cfg", "--w0", "2"]);
        assert!(r.is_err());
    }

    #[test]
    fn bad_builtin_parameters_are_input_errors() {
        let err = parse(&["simulate", "--sigma", "-1"]).command.to_spec().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
