//! Command-line front end: simulate, reconstruct, score and self-check.

pub mod check;
pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dipiir::Error;

use config::{ConfigMap, RunConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_CHECK: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "dipiir",
    version,
    about = "Consensus reconstruction from incomplete data"
)]
pub struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config key, e.g. `--set ce.rho=0.4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,

    /// Noise seed (same as `--set seed=N`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (same as `--set output.dir=DIR`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate phantom, complete data and noisy observations.
    Simulate,
    /// Reconstruct from stored observations.
    Reconstruct {
        /// Pipeline to run (overrides the `pipeline` key).
        #[arg(long)]
        pipeline: Option<String>,
    },
    /// Score a reconstruction tensor against a reference tensor.
    Metrics {
        recon: PathBuf,
        reference: PathBuf,
        /// Also write the scores to this JSON file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Adjoint, involution and slice-discipline diagnostics.
    Check,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Shape(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::Agent { source, .. } => exit_code(source),
        Error::Numeric(_) | Error::Plugin(_) | Error::Timeout(_) | Error::Protocol(_) => {
            EXIT_RUNTIME
        }
    }
}

fn load_config(cli: &Cli) -> dipiir::Result<RunConfig> {
    let mut map = match &cli.config {
        Some(p) => ConfigMap::load(p)?,
        None => ConfigMap::default(),
    };
    if let Some(seed) = cli.seed {
        map.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &cli.out {
        map.set("output.dir", &out.display().to_string())?;
    }
    for pair in &cli.set {
        map.set_pair(pair)?;
    }
    if let Command::Reconstruct {
        pipeline: Some(p), ..
    } = &cli.command
    {
        map.set("pipeline", p)?;
    }
    RunConfig::resolve(&map)
}

fn dispatch(cli: &Cli) -> dipiir::Result<i32> {
    if let Command::Metrics {
        recon,
        reference,
        report,
    } = &cli.command
    {
        run::metrics(recon, reference, report.as_deref())?;
        return Ok(0);
    }
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Simulate => run::simulate(&cfg).map(|_| 0),
        Command::Reconstruct { .. } => run::reconstruct(&cfg).map(|_| 0),
        Command::Check => check::run_checks(&cfg).map(|ok| if ok { 0 } else { EXIT_CHECK }),
        Command::Metrics { .. } => unreachable!(),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
