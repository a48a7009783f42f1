//! `beat` command-line toolkit: format conversion, annotation statistics,
//! beat extraction, metric evaluation and CaMN runs.
//!
//! Exit codes: 0 success, 1 other failure (missing file, bad usage of the
//! network config), 2 parse error, 3 data mismatch, 4 numeric failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, Result, EXIT_MISMATCH, EXIT_NUMERIC, EXIT_OK, EXIT_OTHER, EXIT_PARSE};

#[derive(Debug, Parser)]
#[command(name = "beat", version, about = "Co-speech gesture data and evaluation toolkit")]
pub struct Cli {
    /// TOML run configuration; defaults to $BEATKIT_CONFIG when set.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resample BVH/blendshape/WAV files, or export joint positions and framed words.
    Convert(commands::convert::Args),
    /// Compute an evaluation metric and print a JSON report.
    Eval(commands::eval::Args),
    /// Semantic score histograms, per-word tables and agreement tables.
    Stats(commands::stats::Args),
    /// Extract audio or motion beats to CSV.
    Beats(commands::beats::Args),
    /// Train, run, ablate or gradient-check the cascaded motion network.
    Camn(commands::camn::Args),
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Convert(a) => commands::convert::run(a, &config, out),
        Command::Eval(a) => commands::eval::run(a, &config, out),
        Command::Stats(a) => commands::stats::run(a, &config, out),
        Command::Beats(a) => commands::beats::run(a, &config, out),
        Command::Camn(a) => commands::camn::run(a, &config, out),
    }
}
