use proptest::prelude::*;

use super::*;
use crate::netmodel::{validate_network, NodeKind, Phase, C64};
use crate::opf::ClarabelSolver;

fn bus(kind: NodeKind) -> TraceBus {
    TraceBus { node: "n".into(), phase: Phase::A, kind, v_base: 120.0 }
}

/// A trace of `v.len()` minutes on one service-point bus and one core bus.
fn trace_with(v: &[f64], sub_p: f64, power_base: f64) -> SimulationTrace {
    let n = v.len();
    SimulationTrace {
        mode: OpfMode::default(),
        window_minutes: 15,
        power_base,
        buses: vec![bus(NodeKind::ServicePoint), bus(NodeKind::TransformerCore)],
        voltages: v.iter().map(|&x| vec![x, 0.5]).collect(),
        substation: vec![C64::new(sub_p, 0.0); n],
        cable_losses: vec![0.0; n],
        core_losses: vec![0.0; n],
        load: vec![sub_p; n],
        der_generation: vec![0.0; n],
        balance_residual: vec![0.0; n],
        mismatch: vec![0.0; n],
        der_output: vec![vec![]; n],
        der_available: vec![vec![]; n],
        dispatch: vec![],
    }
}

#[test]
fn single_house_feeder() {
    let f = generate_feeder(&FeederGenSpec::new(1, 0.0, 3)).unwrap();
    assert_eq!(f.description.split_phase_transformers.len(), 1);
    assert!(f.description.ders.is_empty());
    assert_eq!(f.population.houses.len(), 1);
    assert!(validate_network(&f.network).is_empty());
}

#[test]
fn generator_is_deterministic() {
    let spec = FeederGenSpec::new(25, 0.4, 11);
    let a = generate_feeder(&spec).unwrap();
    let b = generate_feeder(&spec).unwrap();
    assert_eq!(a.description, b.description);
    assert_eq!(a.population, b.population);
    let c = generate_feeder(&FeederGenSpec::new(25, 0.4, 12)).unwrap();
    assert_ne!(a.description, c.description);
}

#[test]
fn der_count_follows_penetration() {
    // 99% two-sided interval of Binomial(230, 0.5): 115 ± 2.576·√57.5
    let half = 2.576 * 57.5f64.sqrt();
    for seed in 0..5 {
        let d = generate_description(&FeederGenSpec::new(230, 0.5, seed)).unwrap();
        let n = d.ders.len() as f64;
        assert!((n - 115.0).abs() <= half, "seed {seed}: {n} DERs");
    }
}

#[test]
fn bad_specs_rejected() {
    assert!(FeederGenSpec::new(0, 0.5, 0).validate().is_err());
    assert!(FeederGenSpec::new(3, 1.5, 0).validate().is_err());
    let mut s = FeederGenSpec::new(3, 0.5, 0);
    s.max_houses_per_transformer = 5;
    assert!(s.validate().is_err());
}

#[test]
fn seeds_are_independent_streams() {
    assert_ne!(evaluation_day_seed(7), history_seed(7));
    assert_ne!(history_day_seed(history_seed(7), 0), history_day_seed(history_seed(7), 1));
    assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
}

#[test]
fn undervoltage_minutes_counted() {
    let mut v = vec![1.0; 1440];
    for x in &mut v[600..607] {
        *x = 0.94;
    }
    let m = compute_metrics(&trace_with(&v, 0.0, 1e6 / 3.0), 0.95, 1.05);
    assert_eq!(m.violation_minutes, 7);
    assert_eq!(m.undervoltage_minutes, 7);
    assert_eq!(m.overvoltage_minutes, 0);
    assert!((m.worst_violation + 0.01).abs() < 1e-12);
}

#[test]
fn core_bus_ignored_and_inside_is_clean() {
    let v = vec![1.0; 60];
    let m = compute_metrics(&trace_with(&v, 0.0, 1.0), 0.95, 1.05);
    assert_eq!((m.violation_minutes, m.worst_violation), (0, 0.0));
}

#[test]
fn constant_power_energy() {
    // 100 kW for a day is 2.4 MWh
    let pb = 1e6 / 3.0;
    let m = compute_metrics(&trace_with(&vec![1.0; 1440], 1e5 / pb, pb), 0.95, 1.05);
    assert!((m.net_energy_substation_mwh - 2.4).abs() < 1e-9);
}

#[test]
fn envelope_has_one_point_per_window() {
    let mut v = vec![1.0; 120];
    v[20] = 1.04;
    v[100] = 0.96;
    let e = voltage_envelope(&trace_with(&v, 0.0, 1.0), 15);
    assert_eq!(e.len(), 8);
    assert_eq!((e[1].time_h, e[1].v_max, e[1].v_min), (0.25, 1.04, 1.0));
    assert_eq!(e[6].v_min, 0.96);
}

fn small_case(houses: usize, penetration: f64, seed: u64) -> CaseStudy {
    CaseStudy::prepare(&FeederGenSpec::new(houses, penetration, seed), 3, MINUTES_PER_DAY, 15).unwrap()
}

#[test]
fn unloaded_feeder_draws_only_losses() {
    let mut cs = small_case(4, 0.0, 5);
    for d in &mut cs.scenario.demand {
        d.iter_mut().for_each(|s| *s = C64::new(0.0, 0.0));
    }
    let mut cfg = QstsConfig::new(OpfMode { dynamic_limits: false, core_losses: true });
    cfg.horizon_minutes = 45;
    let tr = cs.run(&cfg, &ClarabelSolver).unwrap();
    let m = compute_metrics(&tr, cfg.vmin, cfg.vmax);
    assert_eq!(m.violation_minutes, 0);
    assert!(m.core_losses_kwh > 0.0);
    // a 1e-8 pu balance per minute, integrated over the horizon
    let tol_kwh = 1e-8 * tr.power_base / 60.0 * cfg.horizon_minutes as f64 / 1e3;
    assert!((1e3 * m.net_energy_substation_mwh - m.total_losses_kwh).abs() < tol_kwh);
    assert!(tr.load.iter().all(|l| l.abs() < 1e-12));
}

#[test]
fn dispatch_is_feasible_and_energy_balances() {
    let cs = small_case(6, 1.0, 2);
    let mut cfg = QstsConfig::new(OpfMode { dynamic_limits: true, core_losses: true });
    cfg.horizon_minutes = 60;
    let tr = cs.run(&cfg, &ClarabelSolver).unwrap();
    assert_eq!(tr.minutes(), 60);
    assert_eq!(tr.dispatch.len(), 4);
    let ders = cs.feeder.network.ders();
    for minute in 0..tr.minutes() {
        assert!(tr.balance_residual[minute].abs() < 1e-8);
        assert!(tr.mismatch[minute] < 1e-8);
        for (k, d) in ders.iter().enumerate() {
            for &(p, q) in &tr.der_output[minute][k] {
                assert!(p >= -1e-12 && p <= tr.der_available[minute][k] + 1e-12);
                assert!(p * p + q * q <= d.s_rated * d.s_rated * (1.0 + 1e-9));
            }
        }
    }
    for rec in &tr.dispatch {
        assert!((cfg.opf.regulator.0 - 1e-9..=cfg.opf.regulator.1 + 1e-9).contains(&rec.v0));
        assert_eq!(rec.setpoints.len(), ders.len());
    }
}

#[test]
fn simulation_is_deterministic() {
    let mut cfg = QstsConfig::new(OpfMode { dynamic_limits: true, core_losses: false });
    cfg.horizon_minutes = 30;
    let a = small_case(5, 0.6, 9).run(&cfg, &ClarabelSolver).unwrap();
    let b = small_case(5, 0.6, 9).run(&cfg, &ClarabelSolver).unwrap();
    assert_eq!(a.voltages, b.voltages);
    assert_eq!(a.substation, b.substation);
    assert_eq!(a.der_output, b.der_output);
}

#[test]
fn mismatched_forecast_window_rejected() {
    let cs = small_case(2, 0.0, 1);
    let mut cfg = QstsConfig::new(OpfMode::default());
    cfg.window_minutes = 30;
    assert!(matches!(cs.run(&cfg, &ClarabelSolver), Err(SimError::Forecast(_))));
}

#[test]
fn history_covers_every_house() {
    let f = generate_feeder(&FeederGenSpec::new(6, 0.5, 4)).unwrap();
    let h = simulate_history(&f.network, &f.population, 1, 2);
    assert_eq!(h.len(), 6);
    for (s, house) in h.iter().zip(&f.population.houses) {
        assert_eq!(s.p_load.len(), 2 * MINUTES_PER_DAY);
        assert!(s.p_load.iter().all(|&p| p > 0.0));
        assert_eq!(s.p_gen.iter().any(|&p| p > 0.0), house.solar.is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_feeders_are_valid(houses in 1usize..40, penetration in 0.0f64..=1.0, seed in any::<u64>()) {
        let f = generate_feeder(&FeederGenSpec::new(houses, penetration, seed)).unwrap();
        prop_assert!(validate_network(&f.network).is_empty());
        prop_assert_eq!(f.population.houses.len(), houses);
        prop_assert_eq!(f.description.triplex_lines.len(), houses);
        for t in &f.description.split_phase_transformers {
            let served = f.description.triplex_lines.iter().filter(|l| l.from == t.secondary_node).count();
            prop_assert!((1..=4).contains(&served));
        }
        let with_solar = f.population.houses.iter().filter(|h| h.solar.is_some()).count();
        prop_assert_eq!(with_solar, f.network.ders().len());
    }

    #[test]
    fn integration_is_linear_and_exact_for_constants(c in -10.0f64..10.0, n in 1usize..2000, k in -3.0f64..3.0) {
        let x = vec![c; n];
        prop_assert!((integrate_minutes(&x) - c * n as f64).abs() < 1e-9 * (1.0 + (c * n as f64).abs()));
        let y: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
        let ky: Vec<f64> = y.iter().map(|v| k * v).collect();
        prop_assert!((integrate_minutes(&ky) - k * integrate_minutes(&y)).abs() < 1e-9 * (1.0 + integrate_minutes(&y)));
    }
}
