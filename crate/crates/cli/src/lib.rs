//! Experiment driver for the `adiaphase` binary: builds an
//! [`ExperimentSpec`] from flags, runs `simulate`, `tscan` or
//! `consistency`, and writes CSV tables plus a JSON report.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod report;
pub mod spec;

pub use args::{Cli, Command};
pub use commands::{consistency, simulate, tscan, REPORT_FILE, THREADS_ENV};
pub use error::CliError;
pub use report::RunReport;
pub use spec::{ExperimentSpec, ModelSource};

/// Runs one parsed command.
pub fn run(command: &Command) -> Result<RunReport, CliError> {
    let spec = command.to_spec()?;
    match command {
        Command::Simulate(_) => simulate(&spec),
        Command::Tscan(_) => tscan(&spec),
        Command::Consistency(_) => consistency(&spec),
    }
}
