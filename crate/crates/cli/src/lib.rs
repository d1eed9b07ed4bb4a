//! Batch front end for `dips-core`: decomposition, constants, bounds,
//! simulation, verification and example statistics, emitted as JSON/CSV.

pub mod commands;
pub mod config;

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use dips_core::DipsError;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "dips", version, about = "Double-indexed permutation statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a tensor into linear, degenerate and constant parts.
    Decompose(RunConfig),
    /// Variance and norm constants of a tensor.
    Constants(RunConfig),
    /// Evaluate a tail bound on a grid.
    Bound(RunConfig),
    /// Exact or Monte Carlo null survival function.
    Simulate(RunConfig),
    /// Run verification checks; one JSON line per check.
    Verify(RunConfig),
    /// Value, constants and bound of a named example statistic.
    Stats(RunConfig),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Input(#[from] DipsError),
    #[error("{0} check(s) failed")]
    Failed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Failed(_) => 3,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.into())
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dips: {e}");
            e.exit_code()
        }
    }
}

type Handler = fn(&RunConfig) -> Result<(), CliError>;

pub fn execute(command: Command) -> Result<(), CliError> {
    let (cfg, f): (RunConfig, Handler) = match command {
        Command::Decompose(c) => (c, commands::cmd_decompose),
        Command::Constants(c) => (c, commands::cmd_constants),
        Command::Bound(c) => (c, commands::cmd_bound),
        Command::Simulate(c) => (c, commands::cmd_simulate),
        Command::Verify(c) => (c, commands::cmd_verify),
        Command::Stats(c) => (c, commands::cmd_stats),
    };
    let cfg = cfg.resolve()?;
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| f(&cfg))
}
