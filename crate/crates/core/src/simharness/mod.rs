//! Synthetic residential feeders and a minute-resolution quasi-static
//! time-series simulator that dispatches the OPF every window.

mod devices;
mod generator;
mod metrics;
mod qsts;
mod scenario;
mod solar;

#[cfg(test)]
mod tests;

use thiserror::Error;

pub use devices::{with_power_factor, BaseProfile, PoolPump, SwitchState, ThermostatMode, ThermostaticDevice};
pub use generator::{
    generate_description, generate_feeder, FeederGenSpec, GeneratedFeeder, House, Population, PRIMARY_V_LN, SECONDARY_V_LN,
    SOLAR_MULTIPLIER, S_BASE,
};
pub use metrics::{compute_metrics, integrate_minutes, voltage_envelope, EnvelopePoint, Metrics};
pub use qsts::{run_qsts, window_operating_point, DispatchRecord, OpfMode, QstsConfig, SimulationTrace, TraceBus};
pub use scenario::{
    generate_day, history_day_seed, outdoor_temperature, simulate_history, water_heater_ambient, DayScenario, SOLAR_BLOCK_MINUTES,
};
pub use solar::{clear_sky_shape, SolarProfile, SUNRISE_HOUR, SUNSET_HOUR};

use crate::netmodel::NetworkError;
use crate::opf::ConicSolver;
use crate::powerflow::PowerFlowError;
use crate::uncertainty::{build_forecasts, ForecastSet, UncertaintyError, MINUTES_PER_DAY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid device: {0}")]
    Device(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("forecasts do not cover the simulation: {0}")]
    Forecast(String),
    #[error("power flow failed at minute {minute}: {source}")]
    PowerFlow { minute: usize, source: PowerFlowError },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

/// Derives an independent seed from `seed` and a stream tag.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(tag))
}

/// Seed of the evaluated day. History days use [`history_day_seed`] on a
/// separate stream, so no evaluated day ever reappears in the history.
pub fn evaluation_day_seed(seed: u64) -> u64 {
    mix_seed(seed, 0xe7a1)
}

pub fn history_seed(seed: u64) -> u64 {
    mix_seed(seed, 0x4157)
}

pub const HISTORY_DAYS: usize = 30;

/// A generated feeder with its forecasts and the day to simulate.
#[derive(Debug, Clone)]
pub struct CaseStudy {
    pub feeder: GeneratedFeeder,
    pub forecasts: ForecastSet,
    pub scenario: DayScenario,
}

impl CaseStudy {
    pub fn prepare(spec: &FeederGenSpec, history_days: usize, horizon_minutes: usize, window_minutes: usize) -> Result<CaseStudy, SimError> {
        let feeder = generate_feeder(spec)?;
        let history = simulate_history(&feeder.network, &feeder.population, history_seed(spec.seed), history_days);
        let forecasts = build_forecasts(&history, window_minutes)?;
        let minutes = horizon_minutes.max(MINUTES_PER_DAY);
        let scenario = generate_day(&feeder.population, evaluation_day_seed(spec.seed), minutes);
        Ok(CaseStudy { feeder, forecasts, scenario })
    }

    pub fn run(&self, cfg: &QstsConfig, solver: &dyn ConicSolver) -> Result<SimulationTrace, SimError> {
        run_qsts(&self.feeder.network, &self.feeder.population, &self.scenario, &self.forecasts, cfg, solver)
    }
}
