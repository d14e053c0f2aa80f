//! JSON documents: the one-window OPF report and the simulation metrics
//! summary. Each carries a `format` field naming its kind and version.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dropf_core::simharness::Metrics;

use crate::error::{CliError, CliResult};

pub const REPORT_FORMAT: &str = "dropf-opf-report v1";
pub const METRICS_FORMAT: &str = "dropf-metrics v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDer {
    pub id: String,
    pub node: String,
    pub phase: String,
    pub p_pu: f64,
    pub q_pu: f64,
    pub p_w: f64,
    pub q_var: f64,
    pub p_cap_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportLimit {
    pub node: String,
    pub phase: String,
    pub kind: String,
    pub v_base_v: f64,
    pub vmin_pu: f64,
    pub vmax_pu: f64,
    pub vmin_v: f64,
    pub vmax_v: f64,
    /// Relaxation voltage magnitude; absent without a solution.
    pub v_pu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpfReport {
    pub format: String,
    pub window: usize,
    pub mode: String,
    pub kappa: usize,
    pub status: String,
    pub solver: String,
    pub raw_status: String,
    pub iterations: u32,
    /// Substation real power (pu and W); absent without a solution.
    pub objective_pu: Option<f64>,
    pub objective_w: Option<f64>,
    pub v0_pu: Option<f64>,
    pub max_rank_residual: f64,
    pub dispatch: Vec<ReportDer>,
    pub limits: Vec<ReportLimit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDoc {
    pub format: String,
    pub mode: String,
    pub seed: u64,
    pub horizon_minutes: usize,
    pub window_minutes: usize,
    pub kappa: usize,
    pub vmin: f64,
    pub vmax: f64,
    pub violation_minutes: usize,
    pub overvoltage_minutes: usize,
    pub undervoltage_minutes: usize,
    pub worst_violation_pu: f64,
    pub net_energy_substation_mwh: f64,
    pub total_losses_kwh: f64,
    pub core_losses_kwh: f64,
    pub held_windows: usize,
    pub degraded_windows: usize,
    pub max_balance_residual_pu: f64,
}

impl MetricsDoc {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            violation_minutes: self.violation_minutes,
            overvoltage_minutes: self.overvoltage_minutes,
            undervoltage_minutes: self.undervoltage_minutes,
            worst_violation: self.worst_violation_pu,
            net_energy_substation_mwh: self.net_energy_substation_mwh,
            total_losses_kwh: self.total_losses_kwh,
            core_losses_kwh: self.core_losses_kwh,
        }
    }
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str, format: &str, get: impl Fn(&T) -> &str) -> CliResult<T> {
    let doc: T = serde_json::from_str(text).map_err(|e| CliError::input(format!("parse error: {e}")))?;
    if get(&doc) != format {
        return Err(CliError::input(format!("expected format '{format}', found '{}'", get(&doc))));
    }
    Ok(doc)
}

impl OpfReport {
    pub fn from_json(text: &str) -> CliResult<OpfReport> {
        from_json(text, REPORT_FORMAT, |d: &OpfReport| &d.format)
    }
}

impl MetricsDoc {
    pub fn from_json(text: &str) -> CliResult<MetricsDoc> {
        from_json(text, METRICS_FORMAT, |d: &MetricsDoc| &d.format)
    }
}

pub fn read_metrics(path: &Path) -> CliResult<MetricsDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    MetricsDoc::from_json(&text).map_err(|e| e.context(path.display()))
}
