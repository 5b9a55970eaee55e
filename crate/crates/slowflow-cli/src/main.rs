//! Config-driven runner for the slowflow library: reductions, critical-point
//! catalogs, long-horizon flows, rate classification, sweeps. Every run
//! leaves a manifest with content hashes so results can be reproduced and
//! compared byte for byte.

mod artifacts;
mod config;
mod experiments;
mod report;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentKind;

/// Failure classes with distinct exit codes: config errors must be
/// distinguishable from numerical breakdown and from honest "could not
/// decide" outcomes in scripts that drive batches of runs.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Inconclusive(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

pub fn cfg_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

pub fn num_err(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(e.to_string())
}

pub fn inc_err(e: impl std::fmt::Display) -> Failure {
    Failure::Inconclusive(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "slowflow",
    version,
    about = "Long-horizon dynamics of polynomial potentials: reduction, critical catalogs, flows, rate classification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Eliminate the stable directions and fit the reduced kernel functional
    Reduce(RunArgs),
    /// Catalog critical points of the leading part on the unit sphere
    Critical(RunArgs),
    /// Integrate the gradient flow and track it in polar form
    Flow(RunArgs),
    /// Integrate the damped second-order system with mode projections
    Elliptic(RunArgs),
    /// Integrate the dissipative first-order system with mode tracking
    Parabolic(RunArgs),
    /// Run a gradient flow and classify its decay rate and limit direction
    Classify(RunArgs),
    /// Classify a grid of initial conditions and aggregate the basins
    Sweep(RunArgs),
    /// Check the adapted-basis identities for a given spectrum
    VerifySpectral(RunArgs),
}

impl Cmd {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Cmd::Reduce(a) => (ExperimentKind::Reduce, a),
            Cmd::Critical(a) => (ExperimentKind::Critical, a),
            Cmd::Flow(a) => (ExperimentKind::Flow, a),
            Cmd::Elliptic(a) => (ExperimentKind::Elliptic, a),
            Cmd::Parabolic(a) => (ExperimentKind::Parabolic, a),
            Cmd::Classify(a) => (ExperimentKind::Classify, a),
            Cmd::Sweep(a) => (ExperimentKind::Sweep, a),
            Cmd::VerifySpectral(a) => (ExperimentKind::VerifySpectral, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Integration horizon (overrides the config)
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Suppress progress output
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.cmd.split();
    match dispatch(kind, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn dispatch(kind: ExperimentKind, args: &RunArgs) -> Result<(), Failure> {
    let mut loaded = config::load(&args.config)?;
    if loaded.run.experiment != kind {
        return Err(Failure::Config(format!(
            "config declares experiment `{}` but the subcommand is `{}`",
            loaded.run.experiment, kind
        )));
    }
    if let Some(seed) = args.seed {
        loaded.run.seed = seed;
    }
    if let Some(t_end) = args.t_end {
        loaded.run.integrator.t_end = Some(t_end);
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| {
            loaded
                .run
                .output_dir
                .as_ref()
                .map(|d| config::resolve_path(&loaded.dir, d))
        })
        .unwrap_or_else(|| args.config.with_extension("out"));

    let ctx = experiments::Context {
        run: &loaded.run,
        config_dir: &loaded.dir,
        config_hash: &loaded.hash,
        out_dir: &out_dir,
        quiet: args.quiet,
    };
    match kind {
        ExperimentKind::Reduce => experiments::reduce(&ctx),
        ExperimentKind::Critical => experiments::critical(&ctx),
        ExperimentKind::Flow => experiments::flow(&ctx),
        ExperimentKind::Elliptic => experiments::elliptic(&ctx),
        ExperimentKind::Parabolic => experiments::parabolic(&ctx),
        ExperimentKind::Classify => experiments::classify(&ctx),
        ExperimentKind::Sweep => sweep::run(&ctx),
        ExperimentKind::VerifySpectral => experiments::verify_spectral(&ctx),
    }
}
