use std::process::ExitCode;

use adiaphase_cli::report::Status;
use adiaphase_cli::{run, Cli, RunReport};
use clap::Parser;

fn summarize(report: &RunReport) {
    for c in &report.checks {
        let tag = if c.status == Status::Fail { "FAIL" } else { "pass" };
        println!("{tag}  {:<40} residual {:.3e}  threshold {:.3e}", c.label(), c.residual.0, c.threshold.0);
    }
    for r in &report.ratio_tests {
        let tag = match r.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Floor => "floor",
        };
        let w0 = r.w0.map(|w| format!(" w0={}", w.0)).unwrap_or_default();
        println!("{tag}  {:<38} T {} -> {}{w0}  ratio {:.4}", r.quantity, r.t.0, r.t_doubled.0, r.ratio.0);
    }
    for f in &report.files {
        println!("wrote {f}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(report) => {
            summarize(&report);
            match report.first_failure() {
                None => ExitCode::SUCCESS,
                Some(name) => {
                    eprintln!("adiaphase {}: check failed: {name}", cli.command.name());
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("adiaphase {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
