//! Simulation outputs: the minute voltage trace, per-minute system totals,
//! dispatch and DER output logs, the per-window voltage envelope, the
//! sensitivity matrices and batch summaries.

use dropf_core::netmodel::{NetworkModel, NodeKind};
use dropf_core::powerflow::SensitivityTensor;
use dropf_core::simharness::{EnvelopePoint, SimulationTrace};

use super::report::MetricsDoc;
use super::{num, Cells, Table};
use crate::error::{CliError, CliResult};

pub const TRACE_KIND: &str = "trace";
pub const SYSTEM_KIND: &str = "system";
pub const DISPATCH_KIND: &str = "dispatch";
pub const DER_KIND: &str = "der";
pub const ENVELOPE_KIND: &str = "envelope";
pub const SENSITIVITY_KIND: &str = "sensitivity";
pub const BATCH_KIND: &str = "batch";

pub fn kind_label(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Substation => "substation",
        NodeKind::MediumVoltage => "medium-voltage",
        NodeKind::Secondary => "secondary",
        NodeKind::ServicePoint => "service-point",
        NodeKind::TransformerCore => "transformer-core",
    }
}

fn trace_meta(t: Table, trace: &SimulationTrace) -> Table {
    t.with_meta("mode", trace.mode.label()).with_meta("power_base_va", num(trace.power_base))
}

/// One row per (minute, node, phase).
pub fn trace_table(trace: &SimulationTrace) -> Table {
    let mut t = trace_meta(Table::new(&["minute", "node", "phase", "kind", "v_pu", "v_ln_v"]), trace);
    for (m, v) in trace.voltages.iter().enumerate() {
        for (b, bus) in trace.buses.iter().enumerate() {
            t.push(vec![
                m.to_string(),
                bus.node.clone(),
                bus.phase.to_string(),
                kind_label(bus.kind).into(),
                num(v[b]),
                num(v[b] * bus.v_base),
            ]);
        }
    }
    t
}

/// Per-minute substation power, losses, load, generation and the power
/// balance residual.
pub fn system_table(trace: &SimulationTrace) -> Table {
    const PU: [&str; 8] =
        ["p_sub_pu", "q_sub_pu", "cable_losses_pu", "core_losses_pu", "load_pu", "der_generation_pu", "balance_residual_pu", "mismatch_pu"];
    const SI: [&str; 7] = ["p_sub_w", "q_sub_var", "cable_losses_w", "core_losses_w", "load_w", "der_generation_w", "balance_residual_w"];
    let mut cols = vec!["minute"];
    cols.extend(PU);
    cols.extend(SI);
    let mut t = trace_meta(Table::new(&cols), trace);
    for m in 0..trace.minutes() {
        let s = trace.substation[m];
        let pu = [
            s.re,
            s.im,
            trace.cable_losses[m],
            trace.core_losses[m],
            trace.load[m],
            trace.der_generation[m],
            trace.balance_residual[m],
            trace.mismatch[m],
        ];
        let mut row = vec![m.to_string()];
        row.extend(pu.iter().map(|&x| num(x)));
        row.extend(pu[..7].iter().map(|&x| num(x * trace.power_base)));
        t.push(row);
    }
    t
}

/// One row per window and DER phase; a window without setpoints (held, or
/// a feeder without DERs) gets a single row with empty DER fields.
pub fn dispatch_table(trace: &SimulationTrace, net: &NetworkModel) -> Table {
    let cols = [
        "window", "minute", "status", "applied", "objective_pu", "objective_w", "max_rank_residual", "v0_pu", "der", "phase", "p_pu",
        "q_pu", "p_w", "q_var", "curtailed",
    ];
    let mut t = trace_meta(Table::new(&cols), trace);
    let pb = trace.power_base;
    for r in &trace.dispatch {
        let head = vec![
            r.window.to_string(),
            r.minute.to_string(),
            r.status.clone(),
            r.applied.to_string(),
            num(r.objective),
            num(r.objective * pb),
            num(r.max_rank_residual),
            num(r.v0),
        ];
        if r.setpoints.is_empty() {
            let mut row = head;
            row.extend(std::iter::repeat(String::new()).take(7));
            t.push(row);
            continue;
        }
        for (k, d) in net.ders().iter().enumerate() {
            for (phase, &(p, q)) in d.phases.iter().zip(&r.setpoints[k]) {
                let mut row = head.clone();
                row.extend([
                    d.id.clone(),
                    phase.to_string(),
                    num(p),
                    num(q),
                    num(p * pb),
                    num(q * pb),
                    r.curtailed.get(k).copied().unwrap_or(false).to_string(),
                ]);
                t.push(row);
            }
        }
    }
    t
}

/// Applied and available output of every DER phase, every minute.
pub fn der_table(trace: &SimulationTrace, net: &NetworkModel) -> Table {
    let cols = ["minute", "der", "phase", "p_pu", "q_pu", "p_available_pu", "p_w", "q_var", "p_available_w"];
    let mut t = trace_meta(Table::new(&cols), trace);
    let pb = trace.power_base;
    for m in 0..trace.minutes() {
        for (k, d) in net.ders().iter().enumerate() {
            for (j, phase) in d.phases.iter().enumerate() {
                let (p, q) = trace.der_output[m][k][j];
                let a = trace.der_available[m][k];
                t.push(vec![
                    m.to_string(),
                    d.id.clone(),
                    phase.to_string(),
                    num(p),
                    num(q),
                    num(a),
                    num(p * pb),
                    num(q * pb),
                    num(a * pb),
                ]);
            }
        }
    }
    t
}

/// Window start time and the extreme physical voltages within the window.
pub fn envelope_table(points: &[EnvelopePoint], window_minutes: usize) -> Table {
    let mut t = Table::new(&["time_h", "v_min_pu", "v_max_pu"]).with_meta("window_minutes", window_minutes);
    for p in points {
        t.push(vec![num(p.time_h), num(p.v_min), num(p.v_max)]);
    }
    t
}

pub fn envelope_from_table(t: &Table) -> CliResult<Vec<EnvelopePoint>> {
    let cols: Vec<usize> = ["time_h", "v_min_pu", "v_max_pu"].iter().map(|c| t.column(c)).collect::<CliResult<_>>()?;
    (0..t.rows.len())
        .map(|r| {
            let c = Cells::new(t, r);
            Ok(EnvelopePoint { time_h: c.parse(cols[0])?, v_min: c.parse(cols[1])?, v_max: c.parse(cols[2])? })
        })
        .collect()
}

/// `∂|V|/∂p` and `∂|V|/∂q` for every (voltage bus, injection bus) pair, in pu
/// and in V/W.
pub fn sensitivity_table(net: &NetworkModel, sens: &SensitivityTensor) -> CliResult<Table> {
    let cols = ["v_node", "v_phase", "inj_node", "inj_phase", "dv_dp_pu", "dv_dq_pu", "dv_dp_v_per_w", "dv_dq_v_per_var"];
    let pb = net.base().power_base();
    let mut t = Table::new(&cols).with_meta("power_base_va", num(pb)).with_meta("slack_v_pu", num(sens.operating_point.slack_voltage));
    let label = |b: usize| {
        let bus = &net.buses()[b];
        let node = &net.nodes()[bus.node];
        let vb = net.base().base(&node.id).map(|nb| nb.v_ln).ok_or_else(|| CliError::input(format!("node '{}' has no base voltage", node.id)))?;
        Ok::<_, CliError>((node.id.clone(), bus.phase.to_string(), vb))
    };
    let labels: Vec<(String, String, f64)> = sens.buses.iter().map(|&b| label(b)).collect::<CliResult<_>>()?;
    for (r, (rn, rp, vb)) in labels.iter().enumerate() {
        for (c, (cn, cp, _)) in labels.iter().enumerate() {
            let (dp, dq) = (sens.dv_dp[(r, c)], sens.dv_dq[(r, c)]);
            t.push(vec![rn.clone(), rp.clone(), cn.clone(), cp.clone(), num(dp), num(dq), num(dp * vb / pb), num(dq * vb / pb)]);
        }
    }
    Ok(t)
}

const BATCH_COLUMNS: [&str; 17] = [
    "seed",
    "mode",
    "horizon_minutes",
    "window_minutes",
    "kappa",
    "vmin",
    "vmax",
    "violation_minutes",
    "overvoltage_minutes",
    "undervoltage_minutes",
    "worst_violation_pu",
    "net_energy_substation_mwh",
    "total_losses_kwh",
    "core_losses_kwh",
    "held_windows",
    "degraded_windows",
    "max_balance_residual_pu",
];

/// One row per run, in the order given.
pub fn batch_table(runs: &[MetricsDoc]) -> Table {
    let mut t = Table::new(&BATCH_COLUMNS);
    for d in runs {
        t.push(vec![
            d.seed.to_string(),
            d.mode.clone(),
            d.horizon_minutes.to_string(),
            d.window_minutes.to_string(),
            d.kappa.to_string(),
            num(d.vmin),
            num(d.vmax),
            d.violation_minutes.to_string(),
            d.overvoltage_minutes.to_string(),
            d.undervoltage_minutes.to_string(),
            num(d.worst_violation_pu),
            num(d.net_energy_substation_mwh),
            num(d.total_losses_kwh),
            num(d.core_losses_kwh),
            d.held_windows.to_string(),
            d.degraded_windows.to_string(),
            num(d.max_balance_residual_pu),
        ]);
    }
    t
}

pub fn batch_from_table(t: &Table) -> CliResult<Vec<MetricsDoc>> {
    let cols: Vec<usize> = BATCH_COLUMNS.iter().map(|c| t.column(c)).collect::<CliResult<_>>()?;
    (0..t.rows.len())
        .map(|r| {
            let c = Cells::new(t, r);
            Ok(MetricsDoc {
                format: super::METRICS_FORMAT.into(),
                seed: c.parse(cols[0])?,
                mode: c.str(cols[1]).to_string(),
                horizon_minutes: c.parse(cols[2])?,
                window_minutes: c.parse(cols[3])?,
                kappa: c.parse(cols[4])?,
                vmin: c.parse(cols[5])?,
                vmax: c.parse(cols[6])?,
                violation_minutes: c.parse(cols[7])?,
                overvoltage_minutes: c.parse(cols[8])?,
                undervoltage_minutes: c.parse(cols[9])?,
                worst_violation_pu: c.parse(cols[10])?,
                net_energy_substation_mwh: c.parse(cols[11])?,
                total_losses_kwh: c.parse(cols[12])?,
                core_losses_kwh: c.parse(cols[13])?,
                held_windows: c.parse(cols[14])?,
                degraded_windows: c.parse(cols[15])?,
                max_balance_residual_pu: c.parse(cols[16])?,
            })
        })
        .collect()
}
