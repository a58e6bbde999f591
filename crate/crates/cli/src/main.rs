//! `fdmx`: train, explain and report on FDM tensile-strength models.
//!
//! Exit codes: 0 success, 2 data error, 3 configuration error, 4 internal
//! invariant failure.

mod error;
mod output;
mod pipeline;
mod settings;
mod summary;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use settings::{Cli, Settings};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    let result = Settings::resolve(&cli.flags).and_then(|s| pipeline::run(cli.command, &s));
    match result {
        Ok(message) => {
            print!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
