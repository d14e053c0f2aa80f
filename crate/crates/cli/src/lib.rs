//! The `dropf` command-line tool: file formats, run configuration and the
//! command implementations behind the binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use dropf_core::opf::solver_from_env;

use config::{RunArgs, RunConfig};
pub use error::{CliError, CliResult, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "dropf", version, about = "Distribution OPF with transformer core losses and forecast-aware voltage limits")]
pub struct Cli {
    /// Log level filter (error, warn, info, debug), overriding RUST_LOG.
    #[arg(long, global = true)]
    pub log: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a feeder file; exits 1 when the network has problems.
    Validate {
        #[arg(long)]
        feeder: PathBuf,
    },
    /// Write a synthetic feeder and its simulated meter history.
    Generate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build per-window forecasts from a meter history.
    BuildForecasts {
        #[arg(long)]
        history: PathBuf,
        #[arg(long, default_value_t = 15)]
        window_min: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Voltage sensitivities at a window's linearization point.
    Sensitivities {
        #[command(flatten)]
        run: RunArgs,
        /// Forecast window index.
        #[arg(long, default_value_t = 0)]
        window: usize,
    },
    /// Solve the OPF of one dispatch window.
    SolveOpf {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        window: usize,
        /// Also write the assembled conic problem.
        #[arg(long)]
        export_problem: bool,
    },
    /// Run the minute-resolution simulation of one configuration.
    RunSim {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run several seeds and modes concurrently.
    Batch {
        #[command(flatten)]
        run: RunArgs,
        /// Seed list such as `0..10` or `1,4,7`.
        #[arg(long, default_value = "0")]
        seeds: String,
        /// `all` or a comma-separated list of mode labels.
        #[arg(long, default_value = "all")]
        modes: String,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write the full minute trace and DER log of every run.
        #[arg(long)]
        full_trace: bool,
    },
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Validate { feeder } => commands::validate(&feeder),
        Command::Generate { run } => commands::generate(&RunConfig::from_args(&run)?),
        Command::BuildForecasts { history, window_min, out } => commands::build_forecasts_cmd(&history, window_min, &out),
        Command::Sensitivities { run, window } => commands::sensitivities(&RunConfig::from_args(&run)?, window),
        Command::SolveOpf { run, window, export_problem } => {
            let cfg = RunConfig::from_args(&run)?;
            commands::solve_opf_cmd(&cfg, window, export_problem, solver_from_env()?.as_ref())
        }
        Command::RunSim { run } => {
            let cfg = RunConfig::from_args(&run)?;
            commands::run_sim(&cfg, solver_from_env()?.as_ref()).map(|_| ())
        }
        Command::Batch { run, seeds, modes, jobs, full_trace } => {
            let cfg = RunConfig::from_args(&run)?;
            let seeds = commands::parse_seeds(&seeds)?;
            let modes = commands::parse_modes(&modes)?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            let docs = commands::batch(&cfg, &seeds, &modes, jobs, full_trace, solver_from_env()?.as_ref())?;
            for d in &docs {
                println!("seed {:>3}  {:<24} violations {:>5} min  energy {:.6} MWh", d.seed, d.mode, d.violation_minutes, d.net_energy_substation_mwh);
            }
            Ok(())
        }
    }
}
