//! Run configuration: command-line flags over an optional TOML config file
//! over built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use dropf_core::opf::OpfOptions;
use dropf_core::simharness::{FeederGenSpec, OpfMode, QstsConfig, HISTORY_DAYS};
use dropf_core::uncertainty::{DEFAULT_KAPPA, MINUTES_PER_DAY};

use crate::error::{CliError, CliResult};

pub const DEFAULT_HOUSES: usize = 30;
pub const DEFAULT_PENETRATION: f64 = 0.5;

/// Flags shared by the commands that solve or simulate.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub feeder: Option<PathBuf>,
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    /// Meter history to build forecasts from when no forecast file is given.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Houses of the synthetic feeder used when no feeder file is given.
    #[arg(long)]
    pub houses: Option<usize>,
    #[arg(long)]
    pub penetration: Option<f64>,
    #[arg(long)]
    pub history_days: Option<usize>,
    #[arg(long)]
    pub kappa: Option<usize>,
    #[arg(long)]
    pub vmin: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dynamic_limits: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub core_losses: Option<bool>,
    #[arg(long)]
    pub horizon_hours: Option<f64>,
    #[arg(long)]
    pub window_min: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub solver_tol: Option<f64>,
    /// Per-solve time limit (s).
    #[arg(long)]
    pub solver_max_time: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// The config file: the same keys as the flags, in snake case.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub feeder: Option<PathBuf>,
    pub forecasts: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub houses: Option<usize>,
    pub penetration: Option<f64>,
    pub history_days: Option<usize>,
    pub kappa: Option<usize>,
    pub vmin: Option<f64>,
    pub vmax: Option<f64>,
    pub dynamic_limits: Option<bool>,
    pub core_losses: Option<bool>,
    pub horizon_hours: Option<f64>,
    pub window_min: Option<usize>,
    pub seed: Option<u64>,
    pub solver_tol: Option<f64>,
    pub solver_max_time: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn from_text(text: &str) -> CliResult<ConfigFile> {
        toml::from_str(text).map_err(|e| CliError::input(format!("parse error: {}", e.to_string().trim_end())))
    }

    pub fn read(path: &Path) -> CliResult<ConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        ConfigFile::from_text(&text).map_err(|e| e.context(path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub feeder: Option<PathBuf>,
    pub forecasts: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub houses: usize,
    pub penetration: f64,
    pub history_days: usize,
    pub kappa: usize,
    pub vmin: f64,
    pub vmax: f64,
    pub mode: OpfMode,
    pub horizon_minutes: usize,
    pub window_minutes: usize,
    pub seed: u64,
    pub solver_tol: f64,
    pub solver_max_time: f64,
    pub out: PathBuf,
}

impl RunConfig {
    /// Resolves flags over `file` over defaults and checks the invariants.
    pub fn resolve(args: &RunArgs, file: &ConfigFile) -> CliResult<RunConfig> {
        let solver = OpfOptions::default().solver;
        let horizon_hours = args.horizon_hours.or(file.horizon_hours).unwrap_or((MINUTES_PER_DAY / 60) as f64);
        let cfg = RunConfig {
            feeder: args.feeder.clone().or_else(|| file.feeder.clone()),
            forecasts: args.forecasts.clone().or_else(|| file.forecasts.clone()),
            history: args.history.clone().or_else(|| file.history.clone()),
            houses: args.houses.or(file.houses).unwrap_or(DEFAULT_HOUSES),
            penetration: args.penetration.or(file.penetration).unwrap_or(DEFAULT_PENETRATION),
            history_days: args.history_days.or(file.history_days).unwrap_or(HISTORY_DAYS),
            kappa: args.kappa.or(file.kappa).unwrap_or(DEFAULT_KAPPA),
            vmin: args.vmin.or(file.vmin).unwrap_or(0.95),
            vmax: args.vmax.or(file.vmax).unwrap_or(1.05),
            mode: OpfMode {
                dynamic_limits: args.dynamic_limits.or(file.dynamic_limits).unwrap_or(false),
                core_losses: args.core_losses.or(file.core_losses).unwrap_or(false),
            },
            horizon_minutes: hours_to_minutes(horizon_hours)?,
            window_minutes: args.window_min.or(file.window_min).unwrap_or(15),
            seed: args.seed.or(file.seed).unwrap_or(0),
            solver_tol: args.solver_tol.or(file.solver_tol).unwrap_or(solver.tol),
            solver_max_time: args.solver_max_time.or(file.solver_max_time).unwrap_or(solver.max_time),
            out: args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the config file named by `--config`, if any, and resolves.
    pub fn from_args(args: &RunArgs) -> CliResult<RunConfig> {
        let file = match &args.config {
            Some(p) => ConfigFile::read(p)?,
            None => ConfigFile::default(),
        };
        RunConfig::resolve(args, &file)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.window_minutes == 0 || 60 % self.window_minutes != 0 {
            return Err(CliError::input(format!("--window-min {} does not divide 60", self.window_minutes)));
        }
        if !(self.vmin > 0.0 && self.vmin < self.vmax && self.vmax.is_finite()) {
            return Err(CliError::input(format!("voltage limits need 0 < vmin < vmax, got vmin={} vmax={}", self.vmin, self.vmax)));
        }
        if !(self.solver_tol > 0.0) || !(self.solver_max_time > 0.0) {
            return Err(CliError::input("solver tolerance and time limit must be positive"));
        }
        if !(0.0..=1.0).contains(&self.penetration) {
            return Err(CliError::input(format!("penetration {} is outside [0, 1]", self.penetration)));
        }
        if self.houses == 0 || self.history_days == 0 {
            return Err(CliError::input("houses and history days must be positive"));
        }
        Ok(())
    }

    pub fn generator_spec(&self) -> FeederGenSpec {
        FeederGenSpec::new(self.houses, self.penetration, self.seed)
    }

    pub fn opf_options(&self) -> OpfOptions {
        let mut o = OpfOptions::default();
        o.solver.tol = self.solver_tol;
        o.solver.max_time = self.solver_max_time;
        o
    }

    pub fn qsts(&self) -> QstsConfig {
        QstsConfig {
            horizon_minutes: self.horizon_minutes,
            window_minutes: self.window_minutes,
            kappa: self.kappa,
            vmin: self.vmin,
            vmax: self.vmax,
            opf: self.opf_options(),
            ..QstsConfig::new(self.mode)
        }
    }
}

fn hours_to_minutes(h: f64) -> CliResult<usize> {
    let m = h * 60.0;
    if !(m >= 1.0) || (m - m.round()).abs() > 1e-9 || m > 1e7 {
        return Err(CliError::input(format!("--horizon-hours {h} is not a positive whole number of minutes")));
    }
    Ok(m.round() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file() -> ConfigFile {
        ConfigFile::from_text("kappa = 5\nvmin = 0.94\nvmax = 1.06\n").unwrap()
    }

    #[test]
    fn defaults_apply_without_flags_or_file() {
        let c = RunConfig::resolve(&RunArgs::default(), &ConfigFile::default()).unwrap();
        assert_eq!((c.kappa, c.vmin, c.vmax), (DEFAULT_KAPPA, 0.95, 1.05));
        assert_eq!((c.horizon_minutes, c.window_minutes), (1440, 15));
        assert_eq!(c.mode, OpfMode::default());
    }

    #[test]
    fn file_overrides_defaults() {
        let c = RunConfig::resolve(&RunArgs::default(), &file()).unwrap();
        assert_eq!((c.kappa, c.vmin, c.vmax), (5, 0.94, 1.06));
    }

    #[test]
    fn flags_override_file() {
        let args = RunArgs { kappa: Some(0), vmin: Some(0.9), vmax: Some(1.1), ..RunArgs::default() };
        let c = RunConfig::resolve(&args, &file()).unwrap();
        assert_eq!((c.kappa, c.vmin, c.vmax), (0, 0.9, 1.1));
        let partial = RunArgs { vmax: Some(1.07), ..RunArgs::default() };
        let c = RunConfig::resolve(&partial, &file()).unwrap();
        assert_eq!((c.kappa, c.vmin, c.vmax), (5, 0.94, 1.07));
    }

    #[test]
    fn invariants_are_enforced() {
        let bad = |args: RunArgs| RunConfig::resolve(&args, &ConfigFile::default()).is_err();
        assert!(bad(RunArgs { window_min: Some(7), ..RunArgs::default() }));
        assert!(bad(RunArgs { vmin: Some(1.05), vmax: Some(0.95), ..RunArgs::default() }));
        assert!(bad(RunArgs { vmin: Some(0.0), ..RunArgs::default() }));
        assert!(bad(RunArgs { horizon_hours: Some(0.0), ..RunArgs::default() }));
        assert!(!bad(RunArgs { horizon_hours: Some(0.25), window_min: Some(5), ..RunArgs::default() }));
    }

    #[test]
    fn unknown_config_key_is_an_input_error() {
        let e = ConfigFile::from_text("kapa = 3\n").unwrap_err();
        assert!(e.message.contains("kapa"));
    }
}
