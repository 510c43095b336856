//! Command-line front end for `metamed`.
//!
//! Three subcommands: `estimate` (one group's mean/SD with naive and bootstrap
//! SEs), `meta` (screening, estimation and random-effects pooling of two-group
//! comparisons read from CSV) and `simulate` (simulation cells from a config
//! file). Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

pub mod analysis;
pub mod args;
pub mod data;
pub mod estimate;
pub mod report;
pub mod simulate;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<metamed::Error> for CliError {
    fn from(e: metamed::Error) -> Self {
        use metamed::Error as E;
        match e {
            E::Parameter(_) | E::Domain(_) | E::Input(_) => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<metamed_sim::SimError> for CliError {
    fn from(e: metamed_sim::SimError) -> Self {
        use metamed_sim::SimError as S;
        match e {
            S::Core(c) => c.into(),
            S::Config(m) => CliError::Usage(format!("invalid configuration: {m}")),
            S::Io(io) => CliError::Io(io),
            S::Csv(_) | S::Json(_) => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parse `args` (including the program name), run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    metamed_sim::configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Estimate(a) => estimate::cmd_estimate(&a),
        Command::Meta(a) => analysis::cmd_meta(&a),
        Command::Simulate(a) => simulate::cmd_simulate(&a),
    }
}

/// Write `text` to `out`, or to stdout when no path is given.
pub(crate) fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Two decimals for human-readable tables.
pub(crate) fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}
