//! `ramc`: command-line front end for bounds, exponents, region checks and simulations.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    ConfigParse(String),
    #[error("config: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] ramc_core::Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigParse(_) | CliError::Schema(_) => EXIT_INVALID,
            CliError::Core(e) if e.is_guard() => EXIT_GUARD,
            CliError::Core(_) => EXIT_INVALID,
            CliError::Io(_) | CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ramc", version, about = "Random multiple access over compound channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML). Relative paths also resolve against $RAMC_CONFIG_DIR.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Write a CSV table here (simulate and sweep).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One Em or Ei exponent from [defaults.exponent].
    Exponent {
        #[command(flatten)]
        common: Common,
    },
    /// The error bound of the region at block length N.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: Option<u64>,
    },
    /// The smallest exponent of the bound and the term attaining it.
    ExponentLimit {
        #[command(flatten)]
        common: Common,
    },
    /// Rate-constraint feasibility, class conversion and the maximal region.
    Region {
        #[command(flatten)]
        common: Common,
    },
    /// Single-user bound minimized over decoder partitions.
    Partition {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: Option<u64>,
    },
    /// Monte Carlo error estimates.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// File for per-trial decoder diagnostics (JSON).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// The bound over a range of block lengths, `start:step:end` or a comma list.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: String,
    },
    /// Reads a record file and checks that it re-serializes identically.
    Inspect { record: PathBuf },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match commands::execute(cli.command) {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
