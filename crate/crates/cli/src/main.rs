use std::process::ExitCode;

use clap::Parser;
use qmc_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.message);
            ExitCode::from(out.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
