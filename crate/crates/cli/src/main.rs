use std::process::ExitCode;

use clap::Parser;

mod cli;
mod commands;
mod error;
mod ingest;
mod report;

fn main() -> ExitCode {
    // clap exits with code 2 on its own usage errors.
    let parsed = cli::Cli::parse();
    match commands::run(parsed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dragonking: {e}");
            e.exit_code()
        }
    }
}
