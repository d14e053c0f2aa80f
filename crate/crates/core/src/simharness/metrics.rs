//! Voltage-violation and energy metrics of a simulation trace.

use super::qsts::SimulationTrace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Minutes in which at least one node-phase left `[vmin, vmax]`.
    pub violation_minutes: usize,
    pub overvoltage_minutes: usize,
    pub undervoltage_minutes: usize,
    /// Largest exceedance, positive above `vmax` and negative below `vmin` (pu).
    pub worst_violation: f64,
    pub net_energy_substation_mwh: f64,
    pub total_losses_kwh: f64,
    pub core_losses_kwh: f64,
}

/// Integral of minute samples (unit·minutes): trapezoids between samples
/// and the last sample held for its minute.
pub fn integrate_minutes(samples: &[f64]) -> f64 {
    let Some(last) = samples.last() else { return 0.0 };
    samples.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() + last
}

/// Buses whose voltages are subject to limits (core nodes excluded).
fn physical(trace: &SimulationTrace) -> Vec<usize> {
    (0..trace.buses.len()).filter(|&b| trace.buses[b].kind.is_physical()).collect()
}

pub fn compute_metrics(trace: &SimulationTrace, vmin: f64, vmax: f64) -> Metrics {
    let buses = physical(trace);
    let (mut any, mut over, mut under) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for v in &trace.voltages {
        let (mut o, mut u) = (false, false);
        for &b in &buses {
            let e = if v[b] > vmax {
                o = true;
                v[b] - vmax
            } else if v[b] < vmin {
                u = true;
                v[b] - vmin
            } else {
                continue;
            };
            if e.abs() > worst.abs() {
                worst = e;
            }
        }
        any += (o || u) as usize;
        over += o as usize;
        under += u as usize;
    }
    let to_wh = trace.power_base / 60.0;
    let sub: Vec<f64> = trace.substation.iter().map(|s| s.re).collect();
    let losses: Vec<f64> = trace.cable_losses.iter().zip(&trace.core_losses).map(|(a, b)| a + b).collect();
    Metrics {
        violation_minutes: any,
        overvoltage_minutes: over,
        undervoltage_minutes: under,
        worst_violation: worst,
        net_energy_substation_mwh: integrate_minutes(&sub) * to_wh / 1e6,
        total_losses_kwh: integrate_minutes(&losses) * to_wh / 1e3,
        core_losses_kwh: integrate_minutes(&trace.core_losses) * to_wh / 1e3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    /// Window start (hours).
    pub time_h: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// Minimum and maximum physical voltage magnitude within each window.
pub fn voltage_envelope(trace: &SimulationTrace, window_minutes: usize) -> Vec<EnvelopePoint> {
    let buses = physical(trace);
    trace
        .voltages
        .chunks(window_minutes.max(1))
        .enumerate()
        .map(|(w, chunk)| {
            let vals = chunk.iter().flat_map(|v| buses.iter().map(move |&b| v[b]));
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            EnvelopePoint { time_h: (w * window_minutes) as f64 / 60.0, v_min: lo, v_max: hi }
        })
        .collect()
}
