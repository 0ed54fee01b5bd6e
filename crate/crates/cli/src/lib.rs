//! Command-line surface of the cultural market simulator.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use error::{CliError, Result};

/// Parses `argv` and runs the command. Help and version requests print to
/// `stdout` and succeed.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            return write!(stdout, "{e}").map_err(|e| CliError::io("<stdout>", e));
        }
        Err(e) => {
            let text = e.to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            return Err(CliError::Usage(text.trim_end().to_string()));
        }
    };
    match &cli.command {
        args::Command::GenScenario(a) => commands::gen_scenario(a, stdout),
        args::Command::Simulate(a) => commands::simulate(a, stdout),
        args::Command::Rank(a) => commands::rank(a, stdout),
        args::Command::Metrics(a) => commands::metrics(a, stdout),
    }
}
