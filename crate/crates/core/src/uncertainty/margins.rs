use super::{ForecastSet, ForecastWindow, UncertaintyError};
use crate::netmodel::NetworkModel;
use crate::powerflow::SensitivityTensor;

/// Margin scalings tried, in order, when tightened limits collapse.
pub const MARGIN_LADDER: [f64; 3] = [0.5, 0.25, 0.0];

pub const DEFAULT_KAPPA: usize = 3;

/// Largest expected injection deviations of one node-phase (pu).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InjectionDeviation {
    pub dp_plus: f64,
    pub dp_minus: f64,
    pub dq_plus: f64,
    pub dq_minus: f64,
}

/// Deviations of net injection (generation minus load) from the forecast means.
pub fn injection_deviations(w: &ForecastWindow) -> InjectionDeviation {
    let (pl, ql, pg, qg) = (w.p_load, w.q_load, w.p_gen, w.q_gen);
    InjectionDeviation {
        dp_minus: (pl.mean - pl.max) - (pg.mean - pg.min),
        dp_plus: (pl.mean - pl.min) - (pg.mean - pg.max),
        dq_minus: (ql.mean - ql.max) - (qg.mean - qg.min),
        dq_plus: (ql.mean - ql.min) - (qg.mean - qg.max),
    }
}

/// Deviation of every sensitivity bus for one window (zero where no forecast).
pub fn deviations_for(net: &NetworkModel, sens: &SensitivityTensor, forecasts: &ForecastSet, window: usize) -> Vec<InjectionDeviation> {
    let per_bus = forecasts.for_buses(net, window);
    sens.buses.iter().map(|&b| per_bus[b].map(injection_deviations).unwrap_or_default()).collect()
}

/// Worst-case voltage change terms of one target bus, one pair of (P, Q)
/// terms per source bus, interleaved `[P₀, Q₀, P₁, Q₁, …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTerms {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

/// `α·ΔP⁺` or `α·ΔP⁻`, whichever moves the voltage in the named direction.
fn pair(alpha: f64, d_plus: f64, d_minus: f64) -> (f64, f64) {
    if alpha >= 0.0 {
        (alpha * d_plus, alpha * d_minus)
    } else {
        (alpha * d_minus, alpha * d_plus)
    }
}

pub fn voltage_deviation_terms(sens: &SensitivityTensor, dev: &[InjectionDeviation], target: usize) -> VoltageTerms {
    let m = sens.buses.len();
    let mut plus = Vec::with_capacity(2 * m);
    let mut minus = Vec::with_capacity(2 * m);
    for (l, d) in dev.iter().enumerate().take(m) {
        let (pp, pm) = pair(sens.dv_dp[(target, l)], d.dp_plus, d.dp_minus);
        let (qp, qm) = pair(sens.dv_dq[(target, l)], d.dq_plus, d.dq_minus);
        plus.extend([pp, qp]);
        minus.extend([pm, qm]);
    }
    VoltageTerms { plus, minus }
}

/// Sum of the `kappa` largest-magnitude terms. Equal magnitudes keep their
/// input order.
pub fn summaxk(terms: &[f64], kappa: usize) -> f64 {
    if kappa == 0 || terms.is_empty() {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..terms.len()).collect();
    idx.sort_by(|&a, &b| terms[b].abs().total_cmp(&terms[a].abs()).then(a.cmp(&b)));
    idx.iter().take(kappa).map(|&i| terms[i]).sum()
}

/// Voltage margins per sensitivity bus: `ΔV⁺ ≥ 0`, `ΔV⁻ ≤ 0` (pu).
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageMargin {
    pub buses: Vec<usize>,
    pub dv_plus: Vec<f64>,
    pub dv_minus: Vec<f64>,
}

impl VoltageMargin {
    pub fn zero(buses: Vec<usize>) -> VoltageMargin {
        let n = buses.len();
        VoltageMargin { buses, dv_plus: vec![0.0; n], dv_minus: vec![0.0; n] }
    }

    pub fn scaled(&self, gamma: f64) -> VoltageMargin {
        VoltageMargin {
            buses: self.buses.clone(),
            dv_plus: self.dv_plus.iter().map(|v| v * gamma).collect(),
            dv_minus: self.dv_minus.iter().map(|v| v * gamma).collect(),
        }
    }
}

pub fn voltage_margins(sens: &SensitivityTensor, dev: &[InjectionDeviation], kappa: usize) -> VoltageMargin {
    let m = sens.buses.len();
    let mut dv_plus = vec![0.0; m];
    let mut dv_minus = vec![0.0; m];
    if kappa > 0 {
        for j in 0..m {
            let t = voltage_deviation_terms(sens, dev, j);
            dv_plus[j] = summaxk(&t.plus, kappa);
            dv_minus[j] = summaxk(&t.minus, kappa);
        }
    }
    VoltageMargin { buses: sens.buses.clone(), dv_plus, dv_minus }
}

/// Squared voltage-magnitude bounds per network bus (pu²).
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageLimits {
    pub lo_sq: Vec<f64>,
    pub hi_sq: Vec<f64>,
}

impl VoltageLimits {
    pub fn lo(&self, bus: usize) -> f64 {
        self.lo_sq[bus].sqrt()
    }

    pub fn hi(&self, bus: usize) -> f64 {
        self.hi_sq[bus].sqrt()
    }
}

fn node_limits(net: &NetworkModel) -> (Vec<f64>, Vec<f64>) {
    let mut lo = Vec::with_capacity(net.buses().len());
    let mut hi = Vec::with_capacity(net.buses().len());
    for b in net.buses() {
        let n = &net.nodes()[b.node];
        let k = n.phases.position(b.phase).unwrap();
        lo.push(n.vmin[k]);
        hi.push(n.vmax[k]);
    }
    (lo, hi)
}

/// The network's own limits, squared.
pub fn default_voltage_limits(net: &NetworkModel) -> VoltageLimits {
    let (lo, hi) = node_limits(net);
    VoltageLimits { lo_sq: lo.iter().map(|v| v * v).collect(), hi_sq: hi.iter().map(|v| v * v).collect() }
}

/// `v_lo = v̲ − ΔV⁻`, `v_hi = v̄ − ΔV⁺`, squared.
pub fn tightened_voltage_limits(net: &NetworkModel, margins: &VoltageMargin) -> Result<VoltageLimits, UncertaintyError> {
    let (mut lo, mut hi) = node_limits(net);
    for (k, &b) in margins.buses.iter().enumerate() {
        lo[b] -= margins.dv_minus[k];
        hi[b] -= margins.dv_plus[k];
        if lo[b] >= hi[b] {
            return Err(UncertaintyError::MarginCollapse { bus: net.bus_label(b), lo: lo[b], hi: hi[b] });
        }
    }
    Ok(VoltageLimits { lo_sq: lo.iter().map(|v| v * v).collect(), hi_sq: hi.iter().map(|v| v * v).collect() })
}

/// Tightened limits, falling back along [`MARGIN_LADDER`] on collapse.
/// Returns the scaling applied (`1.0` when no fallback was needed).
pub fn limits_with_fallback(net: &NetworkModel, margins: &VoltageMargin) -> (VoltageLimits, f64) {
    match tightened_voltage_limits(net, margins) {
        Ok(l) => (l, 1.0),
        Err(e) => {
            for gamma in MARGIN_LADDER {
                log::warn!("{e}; scaling margins by {gamma}");
                if let Ok(l) = tightened_voltage_limits(net, &margins.scaled(gamma)) {
                    return (l, gamma);
                }
            }
            (default_voltage_limits(net), 0.0)
        }
    }
}
