//! Quasi-static time-series loop: a power flow every minute and an OPF
//! dispatch at every window boundary.

use super::generator::Population;
use super::scenario::DayScenario;
use super::SimError;
use crate::netmodel::{LoadClass, NetworkModel, NodeKind, Phase, C64};
use crate::opf::{
    extract_dispatch, solve_opf, solve_opf_with_margins, BusLoads, ConicSolver, Dispatch, OpfError, OpfOptions, OpfSolution,
    OpfStatus,
};
use crate::powerflow::{branch_flows, PowerFlowModel, PowerFlowOptions, PowerFlowState};
use crate::uncertainty::{
    default_voltage_limits, tightened_voltage_limits, window_margins, ForecastSet, VoltageLimits, VoltageMargin, MINUTES_PER_DAY,
};

/// Which model the dispatching OPF uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpfMode {
    /// Tighten voltage limits by the forecast-uncertainty margins.
    pub dynamic_limits: bool,
    /// Model transformer core shunts in the OPF.
    pub core_losses: bool,
}

impl OpfMode {
    /// The four combinations, core losses off first.
    pub const ALL: [OpfMode; 4] = [
        OpfMode { dynamic_limits: false, core_losses: false },
        OpfMode { dynamic_limits: true, core_losses: false },
        OpfMode { dynamic_limits: false, core_losses: true },
        OpfMode { dynamic_limits: true, core_losses: true },
    ];

    pub fn label(self) -> &'static str {
        match (self.dynamic_limits, self.core_losses) {
            (false, false) => "default-limits/core-off",
            (true, false) => "dynamic-limits/core-off",
            (false, true) => "default-limits/core-on",
            (true, true) => "dynamic-limits/core-on",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QstsConfig {
    pub horizon_minutes: usize,
    pub window_minutes: usize,
    pub mode: OpfMode,
    pub kappa: usize,
    pub vmin: f64,
    pub vmax: f64,
    pub opf: OpfOptions,
    pub power_flow: PowerFlowOptions,
    /// Substation voltage at which sensitivities are linearized (pu).
    pub linearization_v0: f64,
}

impl QstsConfig {
    pub fn new(mode: OpfMode) -> QstsConfig {
        QstsConfig {
            horizon_minutes: MINUTES_PER_DAY,
            window_minutes: 15,
            mode,
            kappa: crate::uncertainty::DEFAULT_KAPPA,
            vmin: 0.95,
            vmax: 1.05,
            opf: OpfOptions::default(),
            power_flow: PowerFlowOptions { tol: 1e-10, max_iter: 40, reuse_jacobian: true },
            linearization_v0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.window_minutes == 0 || 60 % self.window_minutes != 0 {
            return Err(SimError::Config(format!("window of {} min does not divide an hour", self.window_minutes)));
        }
        if !(0.0 < self.vmin && self.vmin < self.vmax) {
            return Err(SimError::Config(format!("voltage limits [{}, {}] are not ordered", self.vmin, self.vmax)));
        }
        if self.horizon_minutes == 0 {
            return Err(SimError::Config("horizon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceBus {
    pub node: String,
    pub phase: Phase,
    pub kind: NodeKind,
    /// Base line-to-neutral voltage (V).
    pub v_base: f64,
}

/// Outcome of one dispatch window.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchRecord {
    pub window: usize,
    pub minute: usize,
    /// OPF status label, or the reason the previous dispatch was held.
    pub status: String,
    /// Whether a new dispatch was applied.
    pub applied: bool,
    pub objective: f64,
    pub max_rank_residual: f64,
    /// Substation setpoint in force after the boundary (pu).
    pub v0: f64,
    /// Per DER, per phase setpoint in force after the boundary (pu).
    pub setpoints: Vec<Vec<(f64, f64)>>,
    pub curtailed: Vec<bool>,
    /// Per bus OPF voltage magnitude and the limits it was held to; empty
    /// when no certified solution was found.
    pub predicted_v: Vec<f64>,
    pub v_lo: Vec<f64>,
    pub v_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub mode: OpfMode,
    pub window_minutes: usize,
    /// Single-phase power base (VA).
    pub power_base: f64,
    pub buses: Vec<TraceBus>,
    /// Per minute, per bus voltage magnitude (pu).
    pub voltages: Vec<Vec<f64>>,
    /// Per minute total substation complex power (pu).
    pub substation: Vec<C64>,
    pub cable_losses: Vec<f64>,
    pub core_losses: Vec<f64>,
    /// Real power consumed by loads, including constant-impedance parts (pu).
    pub load: Vec<f64>,
    pub der_generation: Vec<f64>,
    /// `generation − load − cable losses − core losses` (pu).
    pub balance_residual: Vec<f64>,
    pub mismatch: Vec<f64>,
    /// Per minute, per DER, per phase applied output (pu).
    pub der_output: Vec<Vec<Vec<(f64, f64)>>>,
    /// Per minute, per DER available real power per phase (pu).
    pub der_available: Vec<Vec<f64>>,
    pub dispatch: Vec<DispatchRecord>,
}

impl SimulationTrace {
    pub fn minutes(&self) -> usize {
        self.voltages.len()
    }
}

/// Real output an inverter delivers: maximum power when not curtailed,
/// otherwise capped by the setpoint.
fn applied_output(set: (f64, f64), curtailed: bool, available: f64, d: &crate::netmodel::Der) -> (f64, f64) {
    let p = if curtailed { set.0.min(available) } else { available };
    let p = p.max(d.p_min.min(available)).min(d.s_rated);
    let q_cap = (d.s_rated * d.s_rated - p * p).max(0.0).sqrt();
    let q = set.1.clamp(d.q_min, d.q_max).clamp(-q_cap, q_cap);
    (p, q)
}

struct Prepared {
    phys: NetworkModel,
    opf: NetworkModel,
    house_bus: Vec<usize>,
    /// For each DER, the house whose solar drives it.
    der_house: Vec<Option<usize>>,
    der_buses: Vec<Vec<usize>>,
    core_y: Vec<C64>,
}

fn prepare(net: &NetworkModel, pop: &Population, cfg: &QstsConfig) -> Result<Prepared, SimError> {
    let mut house_bus = Vec::with_capacity(pop.houses.len());
    for h in &pop.houses {
        let i = net.node_index(&h.node).ok_or_else(|| SimError::Config(format!("house node '{}' is not in the network", h.node)))?;
        let node = &net.nodes()[i];
        if node.phases.len() != 1 {
            return Err(SimError::Config(format!("house node '{}' must be single-phase", h.node)));
        }
        house_bus.push(net.bus_index(i, node.phases.to_vec()[0]).unwrap());
    }
    let houses: std::collections::HashSet<&str> = pop.houses.iter().map(|h| h.node.as_str()).collect();
    // house demand replaces any static customer load at the service point
    let loads = net.loads().iter().filter(|l| l.class == LoadClass::TransformerCore || !houses.contains(l.node.as_str())).cloned();
    let phys = NetworkModel::new(net.nodes().to_vec(), net.branches().to_vec(), loads.collect(), net.ders().to_vec(), net.base().clone(), net.units())
        .with_voltage_limits(cfg.vmin, cfg.vmax);
    let opf = if cfg.mode.core_losses { phys.clone() } else { phys.without_load_class(LoadClass::TransformerCore) };
    let der_house = (0..net.ders().len()).map(|k| pop.houses.iter().position(|h| h.der == Some(k))).collect();
    let der_buses = net
        .ders()
        .iter()
        .map(|d| d.phases.iter().map(|p| net.bus_of(&d.node, p).ok_or_else(|| SimError::Config(format!("DER '{}' has no bus", d.id)))).collect())
        .collect::<Result<_, _>>()?;
    let mut core_y = vec![C64::new(0.0, 0.0); net.buses().len()];
    for l in phys.loads().iter().filter(|l| l.class == LoadClass::TransformerCore) {
        for (k, p) in l.phases.iter().enumerate() {
            core_y[phys.bus_of(&l.node, p).unwrap()] += l.y_const[k];
        }
    }
    Ok(Prepared { phys, opf, house_bus, der_house, der_buses, core_y })
}

/// OPF inputs of one window: the network's own loads plus forecast-mean
/// loads, and each DER capped at its forecast mean availability. DERs without
/// a forecast keep their rated `p_max`.
pub fn window_operating_point(net: &NetworkModel, forecasts: &ForecastSet, window: usize) -> (BusLoads, Vec<f64>) {
    let mut loads = BusLoads::from_network(net);
    let fc = forecasts.for_buses(net, window);
    for (b, f) in fc.iter().enumerate() {
        if let Some(f) = f {
            loads.s_pq[b] += C64::new(f.p_load.mean, f.q_load.mean);
        }
    }
    let p_max = net
        .ders()
        .iter()
        .map(|d| {
            let bus = d.phases.iter().next().and_then(|p| net.bus_of(&d.node, p));
            match bus.and_then(|b| fc[b]) {
                Some(f) => f.p_gen.mean.clamp(d.p_min, d.p_max),
                None => d.p_max,
            }
        })
        .collect();
    (loads, p_max)
}

struct WindowOutcome {
    record: DispatchRecord,
    dispatch: Option<(Dispatch, Vec<bool>)>,
}

fn solve_window(
    prep: &Prepared,
    forecasts: &ForecastSet,
    window: usize,
    minute: usize,
    cfg: &QstsConfig,
    solver: &dyn ConicSolver,
) -> WindowOutcome {
    let net = &prep.opf;
    let (loads, p_max) = window_operating_point(net, forecasts, window);

    let mut margins: Option<VoltageMargin> = None;
    let result: Result<OpfSolution, OpfError> = if cfg.mode.dynamic_limits {
        match window_margins(net, forecasts, window, cfg.kappa, cfg.linearization_v0) {
            Ok(m) => {
                let r = solve_opf_with_margins(net, &loads, Some(&p_max), &m.margins, &cfg.opf, solver);
                margins = Some(m.margins);
                r
            }
            Err(e) => {
                log::warn!("window {window}: margins unavailable ({e}); using default limits");
                solve_opf(net, &loads, Some(&p_max), &default_voltage_limits(net), &cfg.opf, solver)
            }
        }
    } else {
        solve_opf(net, &loads, Some(&p_max), &default_voltage_limits(net), &cfg.opf, solver)
    };

    let held = |status: String| WindowOutcome {
        record: DispatchRecord {
            window,
            minute,
            status,
            applied: false,
            objective: f64::NAN,
            max_rank_residual: f64::NAN,
            v0: f64::NAN,
            setpoints: vec![],
            curtailed: vec![],
            predicted_v: vec![],
            v_lo: vec![],
            v_hi: vec![],
        },
        dispatch: None,
    };
    let sol = match result {
        Ok(s) => s,
        Err(e) => {
            log::warn!("window {window}: OPF failed ({e}); holding previous dispatch");
            return held(format!("held: {e}"));
        }
    };
    if !sol.status.is_exact() {
        log::warn!("window {window}: OPF {}; holding previous dispatch", sol.status.label());
        let mut out = held(format!("held: {}", sol.status.label()));
        out.record.objective = sol.objective;
        out.record.max_rank_residual = sol.max_rank_residual();
        return out;
    }
    let dispatch = match extract_dispatch(net, &sol, Some(&p_max), &cfg.opf) {
        Ok(d) => d,
        Err(e) => return held(format!("held: {e}")),
    };
    let curtailed: Vec<bool> = dispatch.der.iter().zip(&p_max).map(|(ph, cap)| ph.iter().any(|&(p, _)| p < cap - 1e-6)).collect();

    let limits: VoltageLimits = match (sol.status, &margins) {
        (OpfStatus::MarginDegraded(g), Some(m)) if g > 0.0 => tightened_voltage_limits(net, &m.scaled(g)).unwrap_or_else(|_| default_voltage_limits(net)),
        (OpfStatus::Exact, Some(m)) => tightened_voltage_limits(net, m).unwrap_or_else(|_| default_voltage_limits(net)),
        _ => default_voltage_limits(net),
    };
    let predicted_v = net
        .buses()
        .iter()
        .map(|b| {
            let k = net.nodes()[b.node].phases.position(b.phase).unwrap();
            sol.node_v[b.node][(k, k)].re.max(0.0).sqrt()
        })
        .collect();
    WindowOutcome {
        record: DispatchRecord {
            window,
            minute,
            status: sol.status.label(),
            applied: true,
            objective: sol.objective,
            max_rank_residual: sol.max_rank_residual(),
            v0: dispatch.v0,
            setpoints: dispatch.der.clone(),
            curtailed: curtailed.clone(),
            predicted_v,
            v_lo: limits.lo_sq.iter().map(|v| v.sqrt()).collect(),
            v_hi: limits.hi_sq.iter().map(|v| v.sqrt()).collect(),
        },
        dispatch: Some((dispatch, curtailed)),
    }
}

/// Runs the time-series simulation of `scenario` on `net`.
///
/// The physical model always contains the transformer core shunts and the
/// constant-impedance share of every house. The OPF sees constant-power
/// loads at their forecast means and, per `cfg.mode`, the core shunts and
/// tightened voltage limits. Windows without a certified OPF solution keep
/// the previous dispatch.
pub fn run_qsts(
    net: &NetworkModel,
    pop: &Population,
    scenario: &DayScenario,
    forecasts: &ForecastSet,
    cfg: &QstsConfig,
    solver: &dyn ConicSolver,
) -> Result<SimulationTrace, SimError> {
    cfg.validate()?;
    if scenario.minutes < cfg.horizon_minutes || scenario.demand.len() != pop.houses.len() {
        return Err(SimError::Config(format!(
            "scenario covers {} min of {} houses; need {} min of {}",
            scenario.minutes,
            scenario.demand.len(),
            cfg.horizon_minutes,
            pop.houses.len()
        )));
    }
    if forecasts.window_minutes != cfg.window_minutes || forecasts.n_windows() * cfg.window_minutes != MINUTES_PER_DAY {
        return Err(SimError::Forecast(format!(
            "forecasts use {}-min windows over {} windows; need a full day of {}-min windows",
            forecasts.window_minutes,
            forecasts.n_windows(),
            cfg.window_minutes
        )));
    }
    let prep = prepare(net, pop, cfg)?;
    let phys = &prep.phys;
    let model = PowerFlowModel::new(phys).map_err(|source| SimError::PowerFlow { minute: 0, source })?;
    let nb = phys.buses().len();
    let static_inj = phys.load_injection();
    let all_y = phys.constant_admittance();
    let buses: Vec<TraceBus> = phys
        .buses()
        .iter()
        .map(|b| {
            let node = &phys.nodes()[b.node];
            TraceBus { node: node.id.clone(), phase: b.phase, kind: node.kind, v_base: phys.base().base(&node.id).map(|x| x.v_ln).unwrap_or(f64::NAN) }
        })
        .collect();

    let ders = phys.ders();
    let mut dispatch = Dispatch::idle(phys, 1.0);
    let mut curtailed = vec![false; ders.len()];
    let mut state: Option<PowerFlowState> = None;
    let mut cache = None;
    let h = cfg.horizon_minutes;
    let mut trace = SimulationTrace {
        mode: cfg.mode,
        window_minutes: cfg.window_minutes,
        power_base: phys.base().power_base(),
        buses,
        voltages: Vec::with_capacity(h),
        substation: Vec::with_capacity(h),
        cable_losses: Vec::with_capacity(h),
        core_losses: Vec::with_capacity(h),
        load: Vec::with_capacity(h),
        der_generation: Vec::with_capacity(h),
        balance_residual: Vec::with_capacity(h),
        mismatch: Vec::with_capacity(h),
        der_output: Vec::with_capacity(h),
        der_available: Vec::with_capacity(h),
        dispatch: Vec::new(),
    };

    for t in 0..h {
        if t % cfg.window_minutes == 0 {
            let w = (t % MINUTES_PER_DAY) / cfg.window_minutes;
            let out = solve_window(&prep, forecasts, w, t, cfg, solver);
            if let Some((d, c)) = out.dispatch {
                dispatch = d;
                curtailed = c;
            }
            let mut rec = out.record;
            if !rec.applied {
                rec.v0 = dispatch.v0;
                rec.setpoints = dispatch.der.clone();
                rec.curtailed = curtailed.clone();
            }
            trace.dispatch.push(rec);
        }

        let mut inj = static_inj.clone();
        let mut extra_y = vec![C64::new(0.0, 0.0); nb];
        for (k, house) in pop.houses.iter().enumerate() {
            let s = scenario.demand[k][t];
            let b = prep.house_bus[k];
            inj[b] -= s * (1.0 - house.z_fraction);
            extra_y[b] += (s * house.z_fraction).conj();
        }
        let consumption_inj = inj.clone();
        let mut outputs = Vec::with_capacity(ders.len());
        let mut available = Vec::with_capacity(ders.len());
        let mut generation = 0.0;
        for (k, d) in ders.iter().enumerate() {
            let avail = match prep.der_house[k] {
                Some(hh) if !scenario.solar[hh].is_empty() => scenario.solar[hh][t],
                Some(_) => 0.0,
                None => d.p_max,
            };
            let out: Vec<(f64, f64)> = dispatch.der[k].iter().map(|&set| applied_output(set, curtailed[k], avail, d)).collect();
            for (&b, &(p, q)) in prep.der_buses[k].iter().zip(&out) {
                inj[b] += C64::new(p, q);
                generation += p;
            }
            outputs.push(out);
            available.push(avail);
        }

        let slack = model.balanced_slack(dispatch.v0);
        let solved = model
            .solve_cached(&inj, &slack, Some(&extra_y), state.as_ref(), &cfg.power_flow, &mut cache)
            .or_else(|_| {
                cache = None;
                model.solve_cached(&inj, &slack, Some(&extra_y), None, &cfg.power_flow, &mut cache)
            })
            .map_err(|source| SimError::PowerFlow { minute: t, source })?;
        let flows = branch_flows(phys, &solved, &inj, Some(&extra_y)).map_err(|source| SimError::PowerFlow { minute: t, source })?;
        let v = solved.phasors();
        let sub: C64 = flows.substation.iter().sum();
        let cable: f64 = flows.loss.iter().map(|l| l.re).sum();
        let mut core = 0.0;
        let mut load = 0.0;
        for b in 0..nb {
            let v2 = v[b].norm_sqr();
            core += v2 * prep.core_y[b].re;
            load += v2 * (all_y[b] - prep.core_y[b] + extra_y[b]).re - consumption_inj[b].re;
        }
        trace.voltages.push(solved.v.clone());
        trace.substation.push(sub);
        trace.cable_losses.push(cable);
        trace.core_losses.push(core);
        trace.load.push(load);
        trace.der_generation.push(generation);
        trace.balance_residual.push(sub.re + generation - load - cable - core);
        trace.mismatch.push(solved.mismatch);
        trace.der_output.push(outputs);
        trace.der_available.push(available);
        state = Some(solved);
    }
    Ok(trace)
}
