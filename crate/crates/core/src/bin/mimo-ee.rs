use std::process::ExitCode;

use clap::Parser;
use mimo_ee::cli::{execute, Args};

fn main() -> ExitCode {
    match execute(&Args::parse()) {
        Ok(outcome) => {
            for f in outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
