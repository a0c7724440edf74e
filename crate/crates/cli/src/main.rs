use std::process::ExitCode;

use clap::Parser;
use synthrf::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("synthrf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
