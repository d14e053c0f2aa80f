//! Load and generation forecasts, and voltage limits tightened by the
//! voltage change the forecast spread can cause.

mod forecast;
mod margins;

use thiserror::Error;

pub use forecast::{build_forecasts, linearization_injection, Band, ForecastSet, ForecastWindow, HistorySeries, MINUTES_PER_DAY};
pub use margins::{
    default_voltage_limits, deviations_for, injection_deviations, limits_with_fallback, summaxk,
    tightened_voltage_limits, voltage_deviation_terms, voltage_margins, InjectionDeviation, VoltageLimits,
    VoltageMargin, VoltageTerms, DEFAULT_KAPPA, MARGIN_LADDER,
};

use crate::netmodel::NetworkModel;
use crate::powerflow::{compute_sensitivities, PowerFlowError, SensitivityTensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("history is empty")]
    EmptyHistory,
    #[error("history is shorter than one day: {0}")]
    ShortHistory(String),
    #[error("invalid history: {0}")]
    BadHistory(String),
    #[error("invalid window: {0}")]
    BadWindow(String),
    #[error("history of {series} has no samples in windows {windows:?}")]
    MissingWindows { series: String, windows: Vec<usize> },
    #[error("margin collapse at {bus}: tightened limits [{lo:.6}, {hi:.6}] are empty")]
    MarginCollapse { bus: String, lo: f64, hi: f64 },
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

/// Everything computed for one dispatch window's tightened limits.
#[derive(Debug, Clone)]
pub struct WindowMargins {
    pub sensitivities: SensitivityTensor,
    pub deviations: Vec<InjectionDeviation>,
    pub margins: VoltageMargin,
}

/// Sensitivities at the window's linearization point and the resulting margins.
pub fn window_margins(
    net: &NetworkModel,
    forecasts: &ForecastSet,
    window: usize,
    kappa: usize,
    slack_v: f64,
) -> Result<WindowMargins, UncertaintyError> {
    let inj = linearization_injection(net, forecasts, window);
    let sensitivities = compute_sensitivities(net, &inj, slack_v)?;
    let deviations = deviations_for(net, &sensitivities, forecasts, window);
    let margins = voltage_margins(&sensitivities, &deviations, kappa);
    Ok(WindowMargins { sensitivities, deviations, margins })
}
