use std::process::ExitCode;

use aoi_cli::{exit_code, run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let result = run(Cli::parse());
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(exit_code(&result))
}
