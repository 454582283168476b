mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, FileConfig};

/// An internal consistency check failed after a computation succeeded.
#[derive(Debug, thiserror::Error)]
#[error("internal invariant violated: {0}")]
pub struct InvariantViolation(pub String);

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Calibrate(a) => commands::calibrate(a, file),
        Command::Evaluate(a) => commands::evaluate_cmd(a, file),
        Command::Analyze(a) => commands::analyze(a, file),
        Command::Synth(a) => commands::synth(a, file),
        Command::Diagram(a) => commands::diagram(a, file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DUALIGN_LOG", "error"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<InvariantViolation>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
