//! The `loopsoup` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod render;

use clap::error::ErrorKind;
use clap::Parser;
use std::ffi::OsString;
use std::process::ExitCode;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

/// Runs a parsed configuration.
pub fn run(config: &ExperimentConfig) -> CliResult<()> {
    if let Some(threads) = config.threads {
        if threads == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match &config.command {
        config::Command::Sample(a) => commands::sample(a).map(|_| ()),
        config::Command::Couple(a) => commands::couple(a),
        config::Command::Verify(a) => commands::verify(a),
        config::Command::Render(a) => render::render(a),
    }
}

/// Parses `args`, runs, and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match ExperimentConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("loopsoup: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
