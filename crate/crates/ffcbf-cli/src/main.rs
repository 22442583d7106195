use std::process::ExitCode;

use clap::Parser;

use ffcbf_cli::{execute, init_threads, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
