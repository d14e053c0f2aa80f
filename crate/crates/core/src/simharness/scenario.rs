//! Minute-resolution demand and solar availability of every house for a
//! simulated day, and the month of meter history forecasts are built from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::devices::{with_power_factor, SwitchState};
use super::generator::{House, Population};
use super::mix_seed;
use crate::netmodel::{NetworkModel, C64};
use crate::uncertainty::{HistorySeries, MINUTES_PER_DAY};

/// Minutes over which a house's solar multiplier stays fixed.
pub const SOLAR_BLOCK_MINUTES: usize = 15;

/// Outdoor temperature (°C): a sinusoid peaking mid-afternoon.
pub fn outdoor_temperature(hour: f64, offset: f64) -> f64 {
    27.0 + offset + 7.0 * (2.0 * std::f64::consts::PI * (hour - 15.0) / 24.0).cos()
}

/// Effective ambient of a water heater: the room temperature, depressed
/// during morning and evening hot-water draws.
pub fn water_heater_ambient(hour: f64, depth: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    let bump = |c: f64, w: f64| (-0.5 * ((h - c) / w).powi(2)).exp();
    20.0 - depth * (bump(7.0, 1.0) + 1.2 * bump(19.5, 1.5))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayScenario {
    pub minutes: usize,
    /// Per house, per minute demand at nominal voltage (pu).
    pub demand: Vec<Vec<C64>>,
    /// Per house, per minute available solar (pu); empty for houses without solar.
    pub solar: Vec<Vec<f64>>,
    pub ambient: Vec<f64>,
}

fn uniform_in(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn house_day(house: &House, rng: &mut ChaCha8Rng, minutes: usize, ambient_offset: f64, sun_factor: f64) -> (Vec<C64>, Vec<f64>) {
    let mut cooling = house.cooling.clone();
    let half = 0.5 * cooling.deadband;
    cooling.internal_temp = cooling.setpoint + rng.gen_range(-half..half);
    cooling.state = if rng.gen_bool(0.3) { SwitchState::On } else { SwitchState::Off };
    let mut heater = house.water_heater.clone();
    if let Some(w) = heater.as_mut() {
        let half = 0.5 * w.deadband;
        w.internal_temp = w.setpoint + rng.gen_range(-half..half);
        w.state = if rng.gen_bool(0.1) { SwitchState::On } else { SwitchState::Off };
    }
    let base_factor = rng.gen_range(0.9..1.1);
    let draw = house.draw_depth * rng.gen_range(0.6..1.4);
    let pump_shift = rng.gen_range(-30..=30);
    let n_blocks = minutes.div_ceil(SOLAR_BLOCK_MINUTES);
    let multipliers: Vec<f64> = match &house.solar {
        Some(s) => (0..n_blocks).map(|_| uniform_in(rng, s.multiplier_bounds) * sun_factor).collect(),
        None => vec![],
    };

    let mut demand = Vec::with_capacity(minutes);
    for t in 0..minutes {
        let hour = (t % MINUTES_PER_DAY) as f64 / 60.0 + 0.5 / 60.0;
        let noise = rng.gen_range(0.9..1.1);
        let mut s = with_power_factor(house.base.demand(hour) * base_factor * noise, house.base.power_factor);
        let ac = cooling.step(outdoor_temperature(hour, ambient_offset), 1.0);
        s += with_power_factor(ac, cooling.power_factor);
        if let Some(w) = heater.as_mut() {
            let p = w.step(water_heater_ambient(hour, draw), 1.0);
            s += with_power_factor(p, w.power_factor);
        }
        if let Some(pump) = &house.pool_pump {
            if pump.is_running(t % MINUTES_PER_DAY, pump_shift) {
                s += with_power_factor(pump.rated_power, pump.power_factor);
            }
        }
        demand.push(s);
    }
    let solar = match &house.solar {
        Some(s) => (0..minutes).map(|t| s.output(t, multipliers[t / SOLAR_BLOCK_MINUTES])).collect(),
        None => vec![],
    };
    (demand, solar)
}

/// Simulates every house over `minutes` from midnight. All randomness
/// comes from `day_seed`.
pub fn generate_day(pop: &Population, day_seed: u64, minutes: usize) -> DayScenario {
    let mut day = ChaCha8Rng::seed_from_u64(mix_seed(day_seed, 0xda7));
    let ambient_offset = day.gen_range(-1.5..1.5);
    let sun_factor = day.gen_range(0.97..1.0);
    let mut demand = Vec::with_capacity(pop.houses.len());
    let mut solar = Vec::with_capacity(pop.houses.len());
    for (h, house) in pop.houses.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(day_seed, 0x40053));
        rng.set_stream(h as u64 + 1);
        let (d, s) = house_day(house, &mut rng, minutes, ambient_offset, sun_factor);
        demand.push(d);
        solar.push(s);
    }
    let ambient = (0..minutes).map(|t| outdoor_temperature((t % MINUTES_PER_DAY) as f64 / 60.0, ambient_offset)).collect();
    DayScenario { minutes, demand, solar, ambient }
}

/// Seed of day `day` of the history drawn from `history_seed`.
pub fn history_day_seed(history_seed: u64, day: usize) -> u64 {
    mix_seed(history_seed, 0x415700 + day as u64)
}

/// Meter readings of every house over `days` days, recorded at nominal
/// voltage at one-minute resolution.
pub fn simulate_history(net: &NetworkModel, pop: &Population, history_seed: u64, days: usize) -> Vec<HistorySeries> {
    let mut series: Vec<HistorySeries> = pop
        .houses
        .iter()
        .map(|h| {
            let phase = net.node(&h.node).map(|n| n.phases.to_vec()[0]).expect("house node exists in the network");
            HistorySeries { node: h.node.clone(), phase, sample_minutes: 1, p_load: vec![], q_load: vec![], p_gen: vec![], q_gen: vec![] }
        })
        .collect();
    for d in 0..days {
        let day = generate_day(pop, history_day_seed(history_seed, d), MINUTES_PER_DAY);
        for (k, s) in series.iter_mut().enumerate() {
            s.p_load.extend(day.demand[k].iter().map(|x| x.re));
            s.q_load.extend(day.demand[k].iter().map(|x| x.im));
            if day.solar[k].is_empty() {
                s.p_gen.extend(std::iter::repeat(0.0).take(MINUTES_PER_DAY));
            } else {
                s.p_gen.extend(&day.solar[k]);
            }
            s.q_gen.extend(std::iter::repeat(0.0).take(MINUTES_PER_DAY));
        }
    }
    series
}
