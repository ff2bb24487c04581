//! `cbden` — denoise chromaticity-brightness images and evaluate the model's
//! dual norm, energy breakdown, and relaxed densities from the shell.
//!
//! Every subcommand is a thin adapter over the library crates: arguments are
//! parsed, validated, and handed to the same public functions a program
//! would call, so CLI results match library results bit for bit. Exit codes:
//! 0 success, 2 finished but not converged, 64 usage, 65 bad domain data,
//! 74 I/O failure.

mod args;
mod commands;
mod util;

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders --help and --version through this same path; only
            // genuine parse failures are usage errors.
            let code = if err.use_stderr() { 64 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.msg);
            ExitCode::from(failure.code)
        }
    }
}
