//! `optomech`: run linear-response spectra, stability maps, time-domain
//! simulations and attractor maps from a TOML config.

mod checkpoint;
mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optomech_core::SweepDirection;

use commands::Run;
use config::{Command, Overrides, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "optomech",
    version,
    about = "Semiclassical microwave optomechanics simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for the kick that starts nonlinear runs off the fixed point.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Power sweep direction for branch continuation.
    #[arg(long, global = true)]
    sweep: Option<SweepDirection>,
    /// Reuse finished columns from an interrupted run with the same config.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Probe transmission |T| of the pump-dressed cavity.
    Spectrum,
    /// Fixed-point stability map and instability boundary.
    Stability,
    /// Pulsed linear response, nonlinear trajectory, or their comparison.
    Timedomain,
    /// Attractor classification over a detuning/power grid.
    Phasemap,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Stability => Command::Stability,
            Cmd::Timedomain => Command::TimeDomain,
            Cmd::Phasemap => Command::PhaseMap,
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let overrides = Overrides {
        out: cli.out,
        workers: cli.workers,
        seed: cli.seed,
        sweep: cli.sweep,
    };
    let cfg = RunConfig::load(&path, &overrides)?;
    let command = Command::from(cli.command);
    cfg.validate_for(command)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers()?)
        .build()
        .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out)?;
    let run = Run {
        params: cfg.device()?,
        hash: cfg.hash(),
        out,
        pool,
        resume: cli.resume,
        cfg,
    };
    match command {
        Command::Spectrum => commands::spectrum::run(&run),
        Command::Stability => commands::stability::run(&run),
        Command::TimeDomain => commands::timedomain::run(&run),
        Command::PhaseMap => commands::phasemap::run(&run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optomech: {e}");
            e.exit_code()
        }
    }
}
