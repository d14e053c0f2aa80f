//! Small per-unit fixtures shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netmodel::{
    Branch, CMatrix, Der, Load, LoadClass, NetworkModel, Node, NodeBase, NodeKind, PerUnitSystem, Phase, PhaseSet,
    Side, UnitSystem, C64,
};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn base_for<'a>(ids: impl IntoIterator<Item = &'a str>) -> PerUnitSystem {
    let mut pu = PerUnitSystem::new(1e6);
    for id in ids {
        pu.insert(id, NodeBase { v_ln: 7200.0, side: Side::Primary });
    }
    pu
}

pub fn pu_net(nodes: Vec<Node>, branches: Vec<Branch>, loads: Vec<Load>, ders: Vec<Der>) -> NetworkModel {
    let ids: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();
    let base = base_for(ids.iter().map(|s| s.as_str()));
    NetworkModel::new(nodes, branches, loads, ders, base, UnitSystem::PerUnit)
}

/// Single-phase two-node feeder (phase a) with one branch of impedance `z`.
pub fn two_node(z: C64, load: Option<C64>) -> NetworkModel {
    let a = PhaseSet::single(Phase::A);
    pu_net(
        vec![Node::new("sub", a, NodeKind::Substation), Node::new("n1", a, NodeKind::MediumVoltage)],
        vec![Branch::single("sub", "n1", Phase::A, z)],
        load.map(|s| Load::constant_power("n1", a, vec![s])).into_iter().collect(),
        vec![],
    )
}

/// Symmetric coupled 3×3 phase impedance restricted to `phases`.
pub fn coupled_z(phases: PhaseSet, zs: C64, zm: C64) -> CMatrix {
    let n = phases.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { zs } else { zm })
}

/// Random unbalanced radial feeder with `n` nodes below the substation,
/// single-, two- and three-phase laterals, PQ loads, core-like shunts and DER.
pub fn random_feeder(n: usize, seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![Node::new("sub", PhaseSet::ABC, NodeKind::Substation)];
    let mut branches = Vec::new();
    let mut loads = Vec::new();
    let mut ders = Vec::new();
    for i in 1..=n {
        let parent = rng.gen_range(0..i);
        let pp = nodes[parent].phases;
        // keep a three-phase trunk for the first few nodes
        let phases = if i <= 3 || pp.len() == 1 || rng.gen_bool(0.4) {
            pp
        } else {
            let opts = pp.to_vec();
            if opts.len() == 3 && rng.gen_bool(0.5) {
                PhaseSet::new(&[opts[0], opts[2]]).unwrap()
            } else {
                PhaseSet::single(opts[rng.gen_range(0..opts.len())])
            }
        };
        let id = format!("n{i}");
        nodes.push(Node::new(id.clone(), phases, NodeKind::MediumVoltage));
        let scale = rng.gen_range(0.5..1.5);
        let z = coupled_z(phases, c(0.004 * scale, 0.008 * scale), c(0.001 * scale, 0.003 * scale));
        branches.push(Branch::new(nodes[parent].id.clone(), id.clone(), phases, z));
        let s: Vec<C64> = phases.iter().map(|_| c(rng.gen_range(0.0..0.02), rng.gen_range(-0.002..0.008))).collect();
        loads.push(Load::constant_power(id.clone(), phases, s));
        if rng.gen_bool(0.3) {
            let y = phases.iter().map(|_| c(rng.gen_range(1e-4..1e-3), -rng.gen_range(1e-4..2e-3))).collect();
            loads.push(Load::constant_impedance(id.clone(), phases, y, LoadClass::TransformerCore));
        }
        if rng.gen_bool(0.3) {
            let p = PhaseSet::single(phases.to_vec()[0]);
            ders.push(Der::inverter(format!("g{i}"), id, p, 0.01, 0.011));
        }
    }
    pu_net(nodes, branches, loads, ders)
}
