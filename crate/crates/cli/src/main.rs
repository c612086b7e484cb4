mod args;
mod commands;
mod error;
mod output;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::error::CliError;

const THREADS_VAR: &str = "RAYON_NUM_THREADS";

/// Size the global pool from the environment; unset or 0 means logical cores.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize =
        raw.trim().parse().map_err(|_| CliError::Config(format!("{THREADS_VAR}={raw:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ffsense: {e}");
            e.exit_code()
        }
    }
}
