//! Brute-force nodal analysis of a center-tapped transformer feeding a
//! three-wire triplex secondary, in SI, with the ideal-transformer relations
//! `E0 = n·Vt1 = n·Vt2` and `I0 = (I1 − I2)/n`. The secondary neutral is
//! grounded at the center tap; every triplex segment carries a neutral
//! conductor, so any neutral current shows up in the solution.

use std::collections::BTreeMap;

use dropf_core::netmodel::{
    BaseSpec, FeederDescription, LoadSpec, NodeKind, NodeSpec, Phase, PhaseSet, TransformerSpec, TriplexSpec, C64,
};
use dropf_core::powerflow::{PowerFlowModel, PowerFlowOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One triplex segment: parent secondary node index (0 = transformer terminal).
#[derive(Debug, Clone)]
pub struct Segment {
    pub parent: usize,
    pub z_line: C64,
    pub z_neutral: C64,
    pub length_m: f64,
}

/// A house load split into two equal 120-V halves and a 240-V part.
#[derive(Debug, Clone, Copy)]
pub struct HouseLoad {
    pub s_total: C64,
    pub share_240: f64,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub s_b: f64,
    pub vbp: f64,
    pub vbs: f64,
    pub phase: Phase,
    pub v0: f64,
    pub z0: C64,
    pub z1: C64,
    pub rc: Option<f64>,
    pub xm: Option<f64>,
    /// Segment `k` feeds secondary node `k + 1`.
    pub segments: Vec<Segment>,
    /// Load at secondary node `k + 1`.
    pub loads: Vec<HouseLoad>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

impl Instance {
    pub fn random(seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vbp = [2400.0, 7200.0, 7620.0, 14400.0][rng.gen_range(0..4)];
        let vbs = 120.0;
        let rating = rng.gen_range(10e3..100e3);
        let zp = vbp * vbp / rating;
        let zs = vbs * vbs / rating;
        let core = rng.gen_range(0..10);
        let m = rng.gen_range(1..=5);
        let segments = (0..m)
            .map(|k| {
                let len = rng.gen_range(10.0..80.0);
                Segment {
                    parent: rng.gen_range(0..=k),
                    z_line: c(rng.gen_range(3e-4..1e-3), rng.gen_range(1e-4..5e-4)) * len,
                    z_neutral: c(rng.gen_range(3e-4..2e-3), rng.gen_range(1e-4..8e-4)) * len,
                    length_m: len,
                }
            })
            .collect();
        let loads = (0..m)
            .map(|_| {
                let p = if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(500.0..8000.0) };
                let pf: f64 = rng.gen_range(0.8..1.0);
                let sign = if rng.gen_bool(0.2) { -1.0 } else { 1.0 };
                HouseLoad { s_total: c(p, sign * p * (1.0 / (pf * pf) - 1.0).sqrt()), share_240: rng.gen_range(0.0..1.0) }
            })
            .collect();
        Instance {
            s_b: rng.gen_range(1e5..5e6),
            vbp,
            vbs,
            phase: Phase::ALL[rng.gen_range(0..3)],
            v0: rng.gen_range(0.95..1.05),
            z0: c(rng.gen_range(0.003..0.01), rng.gen_range(0.005..0.015)) * zp,
            z1: c(rng.gen_range(0.003..0.01), rng.gen_range(0.005..0.015)) * zs,
            rc: (core != 0).then(|| zp / rng.gen_range(0.002..0.01)),
            xm: (core != 1).then(|| zp / rng.gen_range(0.005..0.03)),
            segments,
            loads,
        }
    }

    pub fn turns(&self) -> f64 {
        self.vbp / self.vbs
    }

    fn secondary_id(k: usize) -> String {
        if k == 0 {
            "s".into()
        } else {
            format!("h{k}")
        }
    }

    /// The feeder as a feeder description: the transformer sits directly on
    /// the substation bus.
    pub fn description(&self) -> FeederDescription {
        let node = |id: String, kind, phases| NodeSpec { id, kind, phases, vmin: None, vmax: None, shunt_s: None };
        let mut nodes = vec![node("sub".into(), NodeKind::Substation, Some(PhaseSet::ABC)), node("s".into(), NodeKind::Secondary, None)];
        let mut triplex = Vec::new();
        let mut loads = Vec::new();
        for (k, seg) in self.segments.iter().enumerate() {
            let id = Self::secondary_id(k + 1);
            nodes.push(node(id.clone(), NodeKind::ServicePoint, None));
            let z = [seg.z_line.re, seg.z_line.im];
            triplex.push(TriplexSpec { from: Self::secondary_id(seg.parent), to: id.clone(), z1_ohm: z, z2_ohm: z, length_m: seg.length_m });
            let s = self.loads[k].s_total;
            loads.push(LoadSpec { node: id, phases: None, p_w: vec![s.re], q_var: vec![s.im], g_s: vec![], b_s: vec![] });
        }
        let half = |z: C64| [z.re, z.im];
        FeederDescription {
            base: BaseSpec { s_b: self.s_b, vb_ln_default: Some(self.vbp), vb_ln: BTreeMap::new() },
            nodes,
            branches: vec![],
            split_phase_transformers: vec![TransformerSpec {
                id: "t1".into(),
                primary_node: "sub".into(),
                secondary_node: "s".into(),
                phase: self.phase,
                z0_ohm: half(self.z0),
                z1_ohm: half(self.z1),
                z2_ohm: half(self.z1),
                rc_ohm: self.rc,
                xm_ohm: self.xm,
                vbp_ln: self.vbp,
                vbs_ln: self.vbs,
                rating_va: 25e3,
            }],
            triplex_lines: triplex,
            loads,
            ders: vec![],
        }
    }
}

/// Oracle solution in volts and amperes.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub e0: C64,
    pub i1: C64,
    pub i2: C64,
    /// Per secondary node: line-1, line-2 and neutral potentials.
    pub line1: Vec<C64>,
    pub line2: Vec<C64>,
    pub neutral: Vec<C64>,
    /// Largest neutral current anywhere (winding tap and every segment).
    pub max_neutral_current: f64,
}

/// Solves the full circuit with the primary terminal held at `vp` (V).
pub fn solve_oracle(inst: &Instance, vp: C64) -> OracleSolution {
    let m = inst.segments.len();
    let n_t = inst.turns();
    // unknowns: E0, w1, w2, I1, I2, then (a_k, b_k) for k = 0..=m, then n_k for k = 1..=m
    let a_ix = |k: usize| 5 + 2 * k;
    let b_ix = |k: usize| 6 + 2 * k;
    let n_ix = |k: usize| 5 + 2 * (m + 1) + (k - 1);
    let dim = 5 + 2 * (m + 1) + m;
    let one = c(1.0, 0.0);
    let yc = inst.rc.map_or(c(0.0, 0.0), |r| c(1.0 / r, 0.0)) + inst.xm.map_or(c(0.0, 0.0), |x| c(0.0, -1.0 / x));

    let mut a = DMatrix::<C64>::zeros(dim, dim);
    // primary KCL at E0: (E0 − Vp)/Z0 + Yc E0 + (I1 − I2)/n = 0
    a[(0, 0)] = one / inst.z0 + yc;
    a[(0, 3)] = c(1.0 / n_t, 0.0);
    a[(0, 4)] = c(-1.0 / n_t, 0.0);
    // E0 = n (w1 − 0) = n (0 − w2)
    a[(1, 0)] = one;
    a[(1, 1)] = c(-n_t, 0.0);
    a[(2, 0)] = one;
    a[(2, 2)] = c(n_t, 0.0);
    // winding half impedances
    a[(3, 1)] = one;
    a[(3, a_ix(0))] = -one;
    a[(3, 3)] = -inst.z1;
    a[(4, 2)] = one;
    a[(4, b_ix(0))] = -one;
    a[(4, 4)] = -inst.z1;
    // secondary KCL, currents leaving each node
    a[(a_ix(0), 3)] = -one;
    a[(b_ix(0), 4)] = -one;
    for (k, seg) in inst.segments.iter().enumerate() {
        let (i, j) = (seg.parent, k + 1);
        let y = one / seg.z_line;
        for ix in [a_ix, b_ix] {
            a[(ix(i), ix(i))] += y;
            a[(ix(i), ix(j))] -= y;
            a[(ix(j), ix(j))] += y;
            a[(ix(j), ix(i))] -= y;
        }
        let yn = one / seg.z_neutral;
        a[(n_ix(j), n_ix(j))] += yn;
        if i > 0 {
            a[(n_ix(i), n_ix(i))] += yn;
            a[(n_ix(i), n_ix(j))] -= yn;
            a[(n_ix(j), n_ix(i))] -= yn;
        }
    }
    let lu = a.lu();

    let mut x = DVector::<C64>::zeros(dim);
    let vs = vp / n_t;
    x[0] = vp;
    for k in 0..=m {
        x[a_ix(k)] = vs;
        x[b_ix(k)] = -vs;
    }
    for _ in 0..200 {
        let mut rhs = DVector::<C64>::zeros(dim);
        rhs[0] = vp / inst.z0;
        for (k, load) in inst.loads.iter().enumerate() {
            let j = k + 1;
            let (va, vb, vn) = (x[a_ix(j)], x[b_ix(j)], x[n_ix(j)]);
            let s120 = load.s_total * (0.5 * (1.0 - load.share_240));
            let s240 = load.s_total * load.share_240;
            let i1 = (s120 / (va - vn)).conj();
            let i2 = (s120 / (vb - vn)).conj();
            let i12 = (s240 / (va - vb)).conj();
            rhs[a_ix(j)] -= i1 + i12;
            rhs[b_ix(j)] -= i2 - i12;
            rhs[n_ix(j)] += i1 + i2;
        }
        let next = lu.solve(&rhs).expect("oracle circuit is nonsingular");
        let step = (&next - &x).iter().map(|d| d.norm()).fold(0.0, f64::max);
        x = next;
        if step <= 1e-14 * vs.norm() {
            break;
        }
    }

    let line1: Vec<C64> = (0..=m).map(|k| x[a_ix(k)]).collect();
    let line2: Vec<C64> = (0..=m).map(|k| x[b_ix(k)]).collect();
    let neutral: Vec<C64> = (0..=m).map(|k| if k == 0 { c(0.0, 0.0) } else { x[n_ix(k)] }).collect();
    let mut max_neutral = (x[3] + x[4]).norm();
    for (k, seg) in inst.segments.iter().enumerate() {
        max_neutral = max_neutral.max(((neutral[seg.parent] - neutral[k + 1]) / seg.z_neutral).norm());
    }
    OracleSolution { e0: x[0], i1: x[3], i2: x[4], line1, line2, neutral, max_neutral_current: max_neutral }
}

/// Largest relative terminal-voltage difference between the per-unit
/// T-equivalent power flow and the oracle, and the oracle's largest neutral
/// current in secondary per unit.
pub fn compare(inst: &Instance) -> (f64, f64) {
    let net = inst.description().build().expect("instance builds");
    let model = PowerFlowModel::new(&net).unwrap();
    let opts = PowerFlowOptions { tol: 1e-13, max_iter: 50, reuse_jacobian: false };
    let pf = model.solve(&net.load_injection(), &model.balanced_slack(inst.v0), None, None, &opts).expect("power flow converges");
    let v = pf.phasors();
    let bus = |id: &str| net.bus_of(id, inst.phase).unwrap_or_else(|| panic!("no bus {id}"));
    let core = net.nodes().iter().find(|n| n.kind == NodeKind::TransformerCore).unwrap().id.clone();

    let orc = solve_oracle(inst, v[bus("sub")] * inst.vbp);
    let rel = |a: C64, b: C64| (a - b).norm() / b.norm();
    let mut worst = rel(v[bus(&core)] * inst.vbp, orc.e0);
    for k in 0..=inst.segments.len() {
        let vk = v[bus(&Instance::secondary_id(k))] * inst.vbs;
        worst = worst.max(rel(vk, orc.line1[k] - orc.neutral[k]));
        worst = worst.max(rel(vk, orc.neutral[k] - orc.line2[k]));
    }
    let i_bs = inst.s_b / (6.0 * inst.vbs);
    (worst, orc.max_neutral_current / i_bs)
}
