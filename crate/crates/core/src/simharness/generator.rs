//! Synthetic residential feeders: a three-phase trunk with single-phase
//! laterals, split-phase transformers serving one to four houses, and the
//! appliance population of every house.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::devices::{BaseProfile, PoolPump, SwitchState, ThermostatMode, ThermostaticDevice};
use super::solar::SolarProfile;
use super::{mix_seed, SimError};
use crate::netmodel::{
    BaseSpec, BranchSpec, DerSpec, FeederDescription, NetworkModel, NodeKind, NodeSpec, Phase, PhaseSet, TransformerSpec,
    TriplexSpec,
};

/// Parameters of a synthetic feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederGenSpec {
    pub houses: usize,
    /// Probability that a house has rooftop solar.
    pub penetration: f64,
    pub seed: u64,
    pub max_houses_per_transformer: usize,
}

impl FeederGenSpec {
    pub fn new(houses: usize, penetration: f64, seed: u64) -> FeederGenSpec {
        FeederGenSpec { houses, penetration, seed, max_houses_per_transformer: 4 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.houses == 0 {
            return Err(SimError::Config("a feeder needs at least one house".into()));
        }
        if !(0.0..=1.0).contains(&self.penetration) {
            return Err(SimError::Config(format!("penetration {} is outside [0, 1]", self.penetration)));
        }
        if !(1..=4).contains(&self.max_houses_per_transformer) {
            return Err(SimError::Config("transformers serve between one and four houses".into()));
        }
        Ok(())
    }
}

pub const S_BASE: f64 = 1e6;
pub const PRIMARY_V_LN: f64 = 7200.0;
pub const SECONDARY_V_LN: f64 = 120.0;

// overhead 336 ACSR trunk and 1/0 lateral (Ω/km)
const TRUNK_SELF: [f64; 2] = [0.284, 0.670];
const TRUNK_MUTUAL: [f64; 2] = [0.097, 0.312];
const LATERAL: [f64; 2] = [0.70, 0.85];
// triplex service drop, per hot conductor (Ω/m)
const TRIPLEX: [f64; 2] = [0.0006, 0.00025];
// transformer impedance on its own rating, split evenly between windings
const XFMR_R: f64 = 0.012;
const XFMR_X: f64 = 0.018;
const NO_LOAD_LOSS: f64 = 0.0035;
const MAGNETIZING: f64 = 0.01;

fn trunk_branch(from: &str, to: &str, km: f64) -> BranchSpec {
    let m = |d: [f64; 2], k: usize| (0..3).map(|i| (0..3).map(|j| if i == j { TRUNK_SELF[k] } else { d[k] } * km).collect()).collect();
    BranchSpec {
        from: from.into(),
        to: to.into(),
        phases: PhaseSet::ABC,
        r_ohm: m(TRUNK_MUTUAL, 0),
        x_ohm: m(TRUNK_MUTUAL, 1),
        ampacity_a: None,
    }
}

fn transformer(id: usize, host: &str, phase: Phase, rating: f64) -> TransformerSpec {
    let zbp = PRIMARY_V_LN * PRIMARY_V_LN / rating;
    // half-winding base referred to the 120-V circuit
    let zbs = SECONDARY_V_LN * SECONDARY_V_LN / rating;
    let half = |zb: f64| [0.5 * XFMR_R * zb, 0.5 * XFMR_X * zb];
    TransformerSpec {
        id: format!("t{id}"),
        primary_node: host.into(),
        secondary_node: format!("t{id}s"),
        phase,
        z0_ohm: half(zbp),
        z1_ohm: half(zbs),
        z2_ohm: half(zbs),
        rc_ohm: Some(PRIMARY_V_LN * PRIMARY_V_LN / (NO_LOAD_LOSS * rating)),
        xm_ohm: Some(PRIMARY_V_LN * PRIMARY_V_LN / (MAGNETIZING * rating)),
        vbp_ln: PRIMARY_V_LN,
        vbs_ln: SECONDARY_V_LN,
        rating_va: rating,
    }
}

fn node(id: String, kind: NodeKind, phases: Option<PhaseSet>) -> NodeSpec {
    NodeSpec { id, kind, phases, vmin: None, vmax: None, shunt_s: None }
}

/// Builds the SI description of a synthetic feeder.
pub fn generate_description(spec: &FeederGenSpec) -> Result<FeederDescription, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xfeed));
    let mut groups = Vec::new();
    let mut left = spec.houses;
    while left > 0 {
        let k = rng.gen_range(1..=spec.max_houses_per_transformer.min(left));
        groups.push(k);
        left -= k;
    }

    let mut nodes = vec![node("sub".into(), NodeKind::Substation, Some(PhaseSet::ABC))];
    let mut branches = Vec::new();
    let n_trunk = groups.len().div_ceil(3).max(1);
    let mut hosts: Vec<(String, Option<Phase>)> = Vec::new();
    let mut prev = "sub".to_string();
    for k in 1..=n_trunk {
        let id = format!("m{k}");
        nodes.push(node(id.clone(), NodeKind::MediumVoltage, Some(PhaseSet::ABC)));
        branches.push(trunk_branch(&prev, &id, rng.gen_range(0.3..0.6)));
        hosts.push((id.clone(), None));
        if rng.gen_bool(0.6) {
            let phase = Phase::ALL[k % 3];
            let lid = format!("l{k}");
            let km = rng.gen_range(0.2..0.4);
            nodes.push(node(lid.clone(), NodeKind::MediumVoltage, Some(PhaseSet::single(phase))));
            branches.push(BranchSpec {
                from: id.clone(),
                to: lid.clone(),
                phases: PhaseSet::single(phase),
                r_ohm: vec![vec![LATERAL[0] * km]],
                x_ohm: vec![vec![LATERAL[1] * km]],
                ampacity_a: None,
            });
            hosts.push((lid, Some(phase)));
        }
        prev = id;
    }

    let mut transformers = Vec::new();
    let mut triplex = Vec::new();
    let mut ders = Vec::new();
    let mut house = 0;
    for (t, &k) in groups.iter().enumerate() {
        let (host, phase) = &hosts[rng.gen_range(0..hosts.len())];
        let phase = phase.unwrap_or_else(|| Phase::ALL[rng.gen_range(0..3)]);
        let rating = if k <= 2 { 25e3 } else { 50e3 };
        let x = transformer(t + 1, host, phase, rating);
        nodes.push(node(x.secondary_node.clone(), NodeKind::Secondary, None));
        for _ in 0..k {
            house += 1;
            let hid = format!("h{house}");
            nodes.push(node(hid.clone(), NodeKind::ServicePoint, None));
            let len = rng.gen_range(20.0..60.0);
            let z = [TRIPLEX[0] * len, TRIPLEX[1] * len];
            triplex.push(TriplexSpec { from: x.secondary_node.clone(), to: hid.clone(), z1_ohm: z, z2_ohm: z, length_m: len });
            if rng.gen_bool(spec.penetration) {
                let peak = rng.gen_range(3000.0..6000.0);
                ders.push(DerSpec {
                    id: format!("pv{house}"),
                    node: hid,
                    phases: None,
                    p_min_w: 0.0,
                    p_max_w: peak,
                    q_min_var: None,
                    q_max_var: None,
                    s_rated_va: 1.1 * peak,
                });
            }
        }
        transformers.push(x);
    }

    Ok(FeederDescription {
        base: BaseSpec { s_b: S_BASE, vb_ln_default: Some(PRIMARY_V_LN), vb_ln: BTreeMap::new() },
        nodes,
        branches,
        split_phase_transformers: transformers,
        triplex_lines: triplex,
        loads: vec![],
        ders,
    })
}

/// Appliances and solar of one customer, in per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct House {
    /// Service-point node the house is metered at.
    pub node: String,
    pub base: BaseProfile,
    pub cooling: ThermostaticDevice,
    pub water_heater: Option<ThermostaticDevice>,
    /// Depth of the effective-ambient dip hot-water draws cause (°C).
    pub draw_depth: f64,
    pub pool_pump: Option<PoolPump>,
    /// Share of demand behaving as constant impedance.
    pub z_fraction: f64,
    pub solar: Option<SolarProfile>,
    /// Index of the house's inverter in the network's DER list.
    pub der: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub houses: Vec<House>,
}

pub const SOLAR_MULTIPLIER: (f64, f64) = (0.8, 1.0);

impl Population {
    /// Draws a house for every service point of `net`. A house gets solar
    /// when an inverter is connected at its node.
    pub fn for_network(net: &NetworkModel, seed: u64) -> Result<Population, SimError> {
        let pb = net.base().power_base();
        let kw = |x: f64| 1e3 * x / pb;
        let mut houses = Vec::new();
        for (h, n) in net.nodes().iter().filter(|n| n.kind == NodeKind::ServicePoint).enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x4805e));
            rng.set_stream(h as u64 + 1);
            let base = BaseProfile {
                scale: kw(rng.gen_range(0.5..1.1)),
                power_factor: 0.95,
                morning_peak: rng.gen_range(0.5..0.9),
                evening_peak: rng.gen_range(0.9..1.5),
            };
            let cooling = ThermostaticDevice {
                rated_power: kw(rng.gen_range(2.5..4.0)),
                power_factor: 0.92,
                mode: ThermostatMode::Cooling,
                deadband: rng.gen_range(1.0..2.0),
                setpoint: rng.gen_range(22.5..25.5),
                thermal_resistance: 2.0,
                thermal_capacitance: rng.gen_range(50.0..90.0),
                gain: rng.gen_range(16.0..22.0),
                state: SwitchState::Off,
                internal_temp: 24.0,
            };
            let water_heater = rng.gen_bool(0.6).then(|| ThermostaticDevice {
                rated_power: kw(4.5),
                power_factor: 1.0,
                mode: ThermostatMode::Heating,
                deadband: rng.gen_range(3.0..5.0),
                setpoint: rng.gen_range(49.0..52.0),
                thermal_resistance: 10.0,
                thermal_capacitance: rng.gen_range(250.0..350.0),
                gain: 250.0,
                state: SwitchState::Off,
                internal_temp: 50.0,
            });
            let draw_depth = rng.gen_range(40.0..80.0);
            let pool_pump = rng.gen_bool(0.3).then(|| PoolPump {
                rated_power: kw(rng.gen_range(1.1..1.5)),
                power_factor: 0.85,
                start: rng.gen_range(540..780),
                duration: rng.gen_range(240..420),
            });
            let z_fraction = rng.gen_range(0.3..0.5);
            let der = net.ders().iter().position(|d| d.node == n.id);
            let solar = match der {
                Some(k) => Some(SolarProfile::clear_sky(net.ders()[k].p_max, SOLAR_MULTIPLIER)?),
                None => None,
            };
            let house = House { node: n.id.clone(), base, cooling, water_heater, draw_depth, pool_pump, z_fraction, solar, der };
            house.cooling.validate()?;
            if let Some(w) = &house.water_heater {
                w.validate()?;
            }
            houses.push(house);
        }
        Ok(Population { houses })
    }
}

/// A synthetic feeder with its per-unit network and house population.
#[derive(Debug, Clone)]
pub struct GeneratedFeeder {
    pub description: FeederDescription,
    pub network: NetworkModel,
    pub population: Population,
}

pub fn generate_feeder(spec: &FeederGenSpec) -> Result<GeneratedFeeder, SimError> {
    let description = generate_description(spec)?;
    let network = description.build()?;
    let population = Population::for_network(&network, spec.seed)?;
    Ok(GeneratedFeeder { description, network, population })
}
