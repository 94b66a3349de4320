//! `extmil`: command-line front end for the weak-error experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod args;
mod manifest;
mod run;

use std::process::ExitCode;

use clap::Parser;

use crate::run::CliError;

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 for usage errors and 0 for --help/--version.
            e.exit();
        }
    };
    match run::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
