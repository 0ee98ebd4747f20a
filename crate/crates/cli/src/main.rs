mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] kflip_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (artifact, out) = match &cli.command {
        Command::Spectrum(a) => (commands::spectrum(a)?, &a.output),
        Command::Tv(a) => (commands::tv(a)?, &a.output),
        Command::Bounds(a) => (commands::bounds(a)?, &a.output),
        Command::Couple(a) => (commands::couple(a)?, &a.output),
        Command::Verify(a) => (commands::verify(a)?, &a.output),
    };
    output::emit(&artifact, out.format, out.out.as_deref())?;
    Ok(artifact.counterexample)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
