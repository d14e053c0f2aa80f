//! Command implementations. Each returns `Ok(())` on success; errors carry
//! the exit code through their [`ErrorKind`](crate::error::ErrorKind).

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dropf_core::netmodel::{validate_network, FeederDescription, LoadClass, NetworkModel};
use dropf_core::opf::{
    assemble_opf, solve_opf, solve_opf_with_margins, BusLoads, ConicSolver, OpfSolution, OpfStatus, EXPORT_HEADER,
};
use dropf_core::powerflow::compute_sensitivities;
use dropf_core::simharness::{
    compute_metrics, evaluation_day_seed, generate_day, generate_description, history_seed, run_qsts, simulate_history,
    voltage_envelope, window_operating_point, OpfMode, Population, SimulationTrace,
};
use dropf_core::uncertainty::{
    build_forecasts, default_voltage_limits, limits_with_fallback, linearization_injection, tightened_voltage_limits, window_margins, ForecastSet,
    VoltageLimits, VoltageMargin, MINUTES_PER_DAY,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{
    batch_table, check_power_base, der_table, dispatch_table, envelope_table, kind_label, read_feeder, read_forecasts,
    read_history, sensitivity_table, system_table, to_json, trace_table, write_feeder, write_forecasts, write_history,
    MetricsDoc, OpfReport, ReportDer, ReportLimit, BATCH_KIND, DER_KIND, DISPATCH_KIND, ENVELOPE_KIND, METRICS_FORMAT,
    REPORT_FORMAT, SENSITIVITY_KIND, SINGLE_DAY_NOTE, SYSTEM_KIND, TRACE_KIND,
};

pub const FEEDER_FILE: &str = "feeder.toml";
pub const HISTORY_FILE: &str = "history.csv";
pub const FORECAST_FILE: &str = "forecasts.csv";
pub const SENSITIVITY_FILE: &str = "sensitivities.csv";
pub const REPORT_FILE: &str = "opf-report.json";
pub const PROBLEM_FILE: &str = "problem.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const SYSTEM_FILE: &str = "system.csv";
pub const DISPATCH_FILE: &str = "dispatch.csv";
pub const DER_FILE: &str = "der.csv";
pub const ENVELOPE_FILE: &str = "envelope.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const BATCH_FILE: &str = "batch.csv";

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Parses and checks a feeder file. Prints one line per diagnostic.
pub fn validate(feeder: &Path) -> CliResult<()> {
    let desc = read_feeder(feeder)?;
    let net = desc.build_si().map_err(|e| CliError::domain(e.to_string()).context(feeder.display()))?;
    let diags = validate_network(&net);
    for d in &diags {
        println!("{d}");
    }
    if !diags.is_empty() {
        return Err(CliError::domain(format!("{}: {} problem(s) found", feeder.display(), diags.len())));
    }
    net.to_per_unit().map_err(|e| CliError::domain(e.to_string()).context(feeder.display()))?;
    println!("{}: ok ({} nodes, {} buses)", feeder.display(), net.nodes().len(), net.buses().len());
    Ok(())
}

/// The feeder description of a run: the feeder file, or the synthetic feeder
/// of the generator settings.
pub fn feeder_description(cfg: &RunConfig) -> CliResult<FeederDescription> {
    match &cfg.feeder {
        Some(p) => read_feeder(p),
        None => Ok(generate_description(&cfg.generator_spec())?),
    }
}

fn build_network(desc: &FeederDescription) -> CliResult<NetworkModel> {
    let net = desc.build()?;
    let diags = validate_network(&net);
    if let Some(d) = diags.first() {
        return Err(CliError::domain(format!("invalid feeder: {d}")));
    }
    Ok(net)
}

/// Everything a simulation needs, assembled from files or generated.
pub struct Case {
    pub network: NetworkModel,
    pub population: Population,
    pub forecasts: ForecastSet,
}

pub fn prepare_case(cfg: &RunConfig) -> CliResult<Case> {
    let network = build_network(&feeder_description(cfg)?)?;
    let population = Population::for_network(&network, cfg.seed)?;
    let forecasts = forecasts_for(cfg, &network, Some(&population))?.ok_or_else(|| CliError::input("no forecasts available"))?;
    Ok(Case { network, population, forecasts })
}

/// Forecasts from `--forecasts`, else built from `--history`, else from a
/// history simulated for `population`.
fn forecasts_for(cfg: &RunConfig, net: &NetworkModel, population: Option<&Population>) -> CliResult<Option<ForecastSet>> {
    if let Some(p) = &cfg.forecasts {
        let (f, base) = read_forecasts(p)?;
        check_power_base(base, net.base().power_base()).map_err(|e| e.context(p.display()))?;
        if f.window_minutes != cfg.window_minutes {
            return Err(CliError::input(format!(
                "{}: forecasts use {}-minute windows but the run uses {}",
                p.display(),
                f.window_minutes,
                cfg.window_minutes
            )));
        }
        return Ok(Some(f));
    }
    if let Some(p) = &cfg.history {
        let (series, base) = read_history(p)?;
        check_power_base(base, net.base().power_base()).map_err(|e| e.context(p.display()))?;
        return Ok(Some(build_forecasts(&series, cfg.window_minutes).map_err(|e| CliError::from(e).context(p.display()))?));
    }
    match population {
        Some(pop) => {
            let history = simulate_history(net, pop, history_seed(cfg.seed), cfg.history_days);
            Ok(Some(build_forecasts(&history, cfg.window_minutes)?))
        }
        None => Ok(None),
    }
}

/// Writes a feeder file and its simulated meter history.
pub fn generate(cfg: &RunConfig) -> CliResult<()> {
    let desc = generate_description(&cfg.generator_spec())?;
    let net = desc.build()?;
    let pop = Population::for_network(&net, cfg.seed)?;
    let history = simulate_history(&net, &pop, history_seed(cfg.seed), cfg.history_days);
    create_dir(&cfg.out)?;
    write_feeder(&desc, &cfg.out.join(FEEDER_FILE))?;
    write_history(&history, net.base().power_base(), &cfg.out.join(HISTORY_FILE))?;
    log::info!("generated {} houses, {} DERs, {} history days", pop.houses.len(), net.ders().len(), cfg.history_days);
    Ok(())
}

pub fn build_forecasts_cmd(history: &Path, window_minutes: usize, out: &Path) -> CliResult<()> {
    let (series, base) = read_history(history)?;
    let f = build_forecasts(&series, window_minutes).map_err(|e| CliError::from(e).context(history.display()))?;
    if f.basis_days == 1 {
        log::warn!("forecasts rest on a single day of history ({SINGLE_DAY_NOTE})");
    }
    create_dir(out)?;
    write_forecasts(&f, base, &out.join(FORECAST_FILE))
}

pub fn sensitivities(cfg: &RunConfig, window: usize) -> CliResult<()> {
    let net = build_network(&feeder_description(cfg)?)?;
    let injection = match forecasts_for(cfg, &net, None)? {
        Some(f) => {
            check_window(&f, window)?;
            linearization_injection(&net, &f, window)
        }
        None => net.load_injection(),
    };
    let sens = compute_sensitivities(&net, &injection, 1.0)?;
    create_dir(&cfg.out)?;
    sensitivity_table(&net, &sens)?.write(SENSITIVITY_KIND, &cfg.out.join(SENSITIVITY_FILE))
}

fn check_window(f: &ForecastSet, window: usize) -> CliResult<()> {
    if window >= f.n_windows() {
        return Err(CliError::input(format!("window {window} is outside the {} forecast windows", f.n_windows())));
    }
    Ok(())
}

fn mode_network(net: &NetworkModel, cfg: &RunConfig) -> NetworkModel {
    let net = net.with_voltage_limits(cfg.vmin, cfg.vmax);
    if cfg.mode.core_losses {
        net
    } else {
        net.without_load_class(LoadClass::TransformerCore)
    }
}

/// The limits a solution was held to.
fn limits_of(net: &NetworkModel, status: OpfStatus, margins: Option<&VoltageMargin>) -> VoltageLimits {
    let scaled = |g: f64| margins.and_then(|m| tightened_voltage_limits(net, &m.scaled(g)).ok());
    match status {
        OpfStatus::MarginDegraded(g) if g > 0.0 => scaled(g),
        OpfStatus::MarginDegraded(_) => None,
        _ => scaled(1.0),
    }
    .unwrap_or_else(|| default_voltage_limits(net))
}

/// Solves one dispatch window and writes its report. Infeasible windows
/// exit with a domain error, inexact ones with a solver error, after the
/// report is written.
pub fn solve_opf_cmd(cfg: &RunConfig, window: usize, export_problem: bool, solver: &dyn ConicSolver) -> CliResult<()> {
    let base = build_network(&feeder_description(cfg)?)?;
    let net = mode_network(&base, cfg);
    let forecasts = forecasts_for(cfg, &net, None)?;
    let (loads, p_max) = match &forecasts {
        Some(f) => {
            check_window(f, window)?;
            let (l, p) = window_operating_point(&net, f, window);
            (l, Some(p))
        }
        None => (BusLoads::from_network(&net), None),
    };
    let opts = cfg.opf_options();
    let margins = match (&forecasts, cfg.mode.dynamic_limits) {
        (Some(f), true) => Some(window_margins(&net, f, window, cfg.kappa, 1.0)?.margins),
        _ => None,
    };
    create_dir(&cfg.out)?;
    if export_problem {
        let limits = match &margins {
            Some(m) => limits_with_fallback(&net, m).0,
            None => default_voltage_limits(&net),
        };
        let assembled = assemble_opf(&net, &loads, p_max.as_deref(), &limits, &opts)?;
        write_text(&cfg.out.join(PROBLEM_FILE), &assembled.problem.to_text())?;
        log::info!("exported problem ({EXPORT_HEADER})");
    }
    let sol = match &margins {
        Some(m) => solve_opf_with_margins(&net, &loads, p_max.as_deref(), m, &opts, solver)?,
        None => solve_opf(&net, &loads, p_max.as_deref(), &default_voltage_limits(&net), &opts, solver)?,
    };
    let limits = limits_of(&net, sol.status, margins.as_ref());
    let report = opf_report(&net, cfg, window, &sol, &limits, p_max.as_deref());
    write_text(&cfg.out.join(REPORT_FILE), &to_json(&report))?;
    match sol.status {
        OpfStatus::Infeasible => Err(CliError::domain(format!("window {window}: OPF is infeasible"))),
        OpfStatus::Inexact => {
            Err(CliError::solver(format!("window {window}: relaxation is inexact (max rank residual {:e})", sol.max_rank_residual())))
        }
        _ => Ok(()),
    }
}

pub fn opf_report(net: &NetworkModel, cfg: &RunConfig, window: usize, sol: &OpfSolution, limits: &VoltageLimits, p_max: Option<&[f64]>) -> OpfReport {
    let pb = net.base().power_base();
    let mut dispatch = Vec::new();
    for (k, d) in net.ders().iter().enumerate() {
        let cap = p_max.map(|p| p[k]).unwrap_or(d.p_max);
        // an infeasible solve carries no dispatch
        let Some(set) = sol.der.get(k) else { continue };
        for (phase, &(p, q)) in d.phases.iter().zip(set) {
            dispatch.push(ReportDer {
                id: d.id.clone(),
                node: d.node.clone(),
                phase: phase.to_string(),
                p_pu: p,
                q_pu: q,
                p_w: p * pb,
                q_var: q * pb,
                p_cap_pu: cap,
            });
        }
    }
    let exact = sol.status.is_exact();
    let limits = net
        .buses()
        .iter()
        .enumerate()
        .map(|(b, bus)| {
            let node = &net.nodes()[bus.node];
            let k = node.phases.position(bus.phase).unwrap();
            let vb = net.base().base(&node.id).map(|nb| nb.v_ln).unwrap_or(f64::NAN);
            let (lo, hi) = (limits.lo(b), limits.hi(b));
            ReportLimit {
                node: node.id.clone(),
                phase: bus.phase.to_string(),
                kind: kind_label(node.kind).into(),
                v_base_v: vb,
                vmin_pu: lo,
                vmax_pu: hi,
                vmin_v: lo * vb,
                vmax_v: hi * vb,
                v_pu: exact.then(|| sol.node_v[bus.node][(k, k)].re.max(0.0).sqrt()),
            }
        })
        .collect();
    OpfReport {
        format: REPORT_FORMAT.into(),
        window,
        mode: cfg.mode.label().into(),
        kappa: cfg.kappa,
        status: sol.status.label(),
        solver: sol.solver.backend.into(),
        raw_status: format!("{:?}", sol.solver.raw_status),
        iterations: sol.solver.iterations,
        objective_pu: finite(sol.objective),
        objective_w: finite(sol.objective * pb),
        v0_pu: finite(sol.v0),
        max_rank_residual: sol.max_rank_residual(),
        dispatch,
        limits,
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Runs the time-series simulation of `case` under `cfg`.
pub fn simulate(case: &Case, cfg: &RunConfig, solver: &dyn ConicSolver) -> CliResult<SimulationTrace> {
    let scenario = generate_day(&case.population, evaluation_day_seed(cfg.seed), cfg.horizon_minutes.max(MINUTES_PER_DAY));
    let trace = run_qsts(&case.network, &case.population, &scenario, &case.forecasts, &cfg.qsts(), solver)?;
    Ok(trace)
}

pub fn metrics_doc(trace: &SimulationTrace, cfg: &RunConfig) -> MetricsDoc {
    let m = compute_metrics(trace, cfg.vmin, cfg.vmax);
    MetricsDoc {
        format: METRICS_FORMAT.into(),
        mode: trace.mode.label().into(),
        seed: cfg.seed,
        horizon_minutes: cfg.horizon_minutes,
        window_minutes: cfg.window_minutes,
        kappa: cfg.kappa,
        vmin: cfg.vmin,
        vmax: cfg.vmax,
        violation_minutes: m.violation_minutes,
        overvoltage_minutes: m.overvoltage_minutes,
        undervoltage_minutes: m.undervoltage_minutes,
        worst_violation_pu: m.worst_violation,
        net_energy_substation_mwh: m.net_energy_substation_mwh,
        total_losses_kwh: m.total_losses_kwh,
        core_losses_kwh: m.core_losses_kwh,
        held_windows: trace.dispatch.iter().filter(|d| !d.applied).count(),
        degraded_windows: trace.dispatch.iter().filter(|d| d.status.starts_with("margin-degraded")).count(),
        max_balance_residual_pu: trace.balance_residual.iter().fold(0.0, |a, r| a.max(r.abs())),
    }
}

/// Writes the outputs of one run into `dir`. The full minute trace and the
/// DER log are skipped when `full` is false.
pub fn write_run(dir: &Path, trace: &SimulationTrace, net: &NetworkModel, cfg: &RunConfig, full: bool) -> CliResult<MetricsDoc> {
    create_dir(dir)?;
    if full {
        trace_table(trace).write(TRACE_KIND, &dir.join(TRACE_FILE))?;
        der_table(trace, net).write(DER_KIND, &dir.join(DER_FILE))?;
    }
    system_table(trace).write(SYSTEM_KIND, &dir.join(SYSTEM_FILE))?;
    dispatch_table(trace, net).write(DISPATCH_KIND, &dir.join(DISPATCH_FILE))?;
    envelope_table(&voltage_envelope(trace, cfg.window_minutes), cfg.window_minutes).write(ENVELOPE_KIND, &dir.join(ENVELOPE_FILE))?;
    let doc = metrics_doc(trace, cfg);
    write_text(&dir.join(METRICS_FILE), &to_json(&doc))?;
    Ok(doc)
}

/// Simulates one configuration. Voltage violations are reported in the
/// metrics, not through the exit code.
pub fn run_sim(cfg: &RunConfig, solver: &dyn ConicSolver) -> CliResult<MetricsDoc> {
    let case = prepare_case(cfg)?;
    let trace = simulate(&case, cfg, solver)?;
    let doc = write_run(&cfg.out, &trace, &case.network, cfg, true)?;
    log::info!(
        "{}: {} violation minutes, {:.6} MWh at the substation",
        doc.mode,
        doc.violation_minutes,
        doc.net_energy_substation_mwh
    );
    Ok(doc)
}

/// Directory name of a mode, e.g. `dynamic-limits_core-on`.
pub fn mode_dir(mode: OpfMode) -> String {
    mode.label().replace('/', "_")
}

pub fn parse_mode(s: &str) -> CliResult<OpfMode> {
    let s = s.trim();
    OpfMode::ALL
        .into_iter()
        .find(|m| m.label() == s || mode_dir(*m) == s)
        .ok_or_else(|| CliError::input(format!("unknown mode '{s}'")))
}

pub fn parse_modes(s: &str) -> CliResult<Vec<OpfMode>> {
    if s.trim() == "all" {
        return Ok(OpfMode::ALL.to_vec());
    }
    s.split(',').map(parse_mode).collect()
}

/// `"3"`, `"0,4,7"` or a half-open range `"0..10"`.
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::input(format!("invalid seed list '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

/// Independent (seed, mode) runs, executed concurrently, each in its own
/// directory `out/seed-<s>/<mode>`. Writes `batch.csv` in run order.
pub fn batch(base: &RunConfig, seeds: &[u64], modes: &[OpfMode], jobs: usize, full: bool, solver: &dyn ConicSolver) -> CliResult<Vec<MetricsDoc>> {
    if seeds.is_empty() || modes.is_empty() {
        return Err(CliError::input("batch needs at least one seed and one mode"));
    }
    create_dir(&base.out)?;
    let seed_cfg = |seed: u64| RunConfig { seed, ..base.clone() };
    // cases are shared by the modes of a seed
    let cases: Vec<Case> = run_parallel(seeds.len(), jobs, |i| prepare_case(&seed_cfg(seeds[i])))?;
    let runs: Vec<(usize, OpfMode)> = (0..seeds.len()).flat_map(|i| modes.iter().map(move |&m| (i, m))).collect();
    let docs = run_parallel(runs.len(), jobs, |r| {
        let (i, mode) = runs[r];
        let cfg = RunConfig { mode, out: run_dir(&base.out, seeds[i], mode), ..seed_cfg(seeds[i]) };
        let trace = simulate(&cases[i], &cfg, solver).map_err(|e| e.context(format!("seed {} {}", seeds[i], mode.label())))?;
        let doc = write_run(&cfg.out, &trace, &cases[i].network, &cfg, full)?;
        log::info!("seed {} {}: {} violation minutes", seeds[i], mode.label(), doc.violation_minutes);
        Ok(doc)
    })?;
    batch_table(&docs).write(BATCH_KIND, &base.out.join(BATCH_FILE))?;
    Ok(docs)
}

pub fn run_dir(out: &Path, seed: u64, mode: OpfMode) -> PathBuf {
    out.join(format!("seed-{seed}")).join(mode_dir(mode))
}

/// Runs `f(0..n)` on up to `jobs` threads; results keep index order. The
/// first error (by index) is returned.
fn run_parallel<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> CliResult<T> + Sync) -> CliResult<Vec<T>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every index ran")).collect()
}
