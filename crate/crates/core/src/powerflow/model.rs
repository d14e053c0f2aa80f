use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::{PowerFlowError, PowerFlowOptions, PowerFlowState};
use crate::netmodel::{NetworkModel, Topology, C64};

/// Bus admittance model of a network with zero-impedance branches merged.
///
/// Newton unknowns are `(|V|, θ)` of every reduced bus not tied to the
/// substation. All vectors indexed by "bus" use the network's canonical
/// node-phase order.
#[derive(Debug, Clone)]
pub struct PowerFlowModel {
    n_bus: usize,
    /// Reduced bus of every network bus.
    rep: Vec<usize>,
    /// Newton position of each reduced bus (`None` for slack).
    pos: Vec<Option<usize>>,
    /// Network bus of the substation phase fixing each slack reduced bus.
    slack_source: Vec<Option<usize>>,
    /// Balanced angle of each reduced bus's phase, for flat starts.
    angle: Vec<f64>,
    /// Network buses of the substation node.
    root_buses: Vec<usize>,
    root_phase_angle: Vec<f64>,
    y_diag: Vec<C64>,
    y_off: Vec<Vec<(usize, C64)>>,
    unknown_rep: Vec<usize>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Complex matrix inverse of a branch impedance.
pub(crate) fn branch_admittance(z: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    z.clone().try_inverse().filter(|y| y.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
}

impl PowerFlowModel {
    pub fn new(net: &NetworkModel) -> Result<PowerFlowModel, PowerFlowError> {
        let topo = Topology::new(net)?;
        let nb = net.buses().len();
        let root = topo.root;
        let bus = |node: usize, phase| net.bus_index(node, phase).expect("branch phases are validated");

        // merge buses joined by zero-impedance branches
        let mut parent: Vec<usize> = (0..nb).collect();
        for (k, b) in net.branches().iter().enumerate() {
            if b.is_zero_impedance() {
                for p in b.phases.iter() {
                    let f = find(&mut parent, bus(topo.from_node[k], p));
                    let t = find(&mut parent, bus(topo.to_node[k], p));
                    if f != t {
                        parent[t.max(f)] = t.min(f);
                    }
                }
            }
        }
        let mut rep = vec![0; nb];
        let mut reduced_of_root: BTreeMap<usize, usize> = BTreeMap::new();
        let mut n_red = 0;
        for b in 0..nb {
            let r = find(&mut parent, b);
            let idx = *reduced_of_root.entry(r).or_insert_with(|| {
                n_red += 1;
                n_red - 1
            });
            rep[b] = idx;
        }
        let root_buses: Vec<usize> = (0..nb).filter(|&b| net.buses()[b].node == root).collect();
        let root_phase_angle = root_buses.iter().map(|&b| net.buses()[b].phase.balanced_angle()).collect();
        let mut slack_source = vec![None; n_red];
        for &b in &root_buses {
            slack_source[rep[b]] = Some(b);
        }
        let mut angle = vec![0.0; n_red];
        for b in 0..nb {
            angle[rep[b]] = net.buses()[b].phase.balanced_angle();
        }
        let mut pos = vec![None; n_red];
        let mut unknown_rep = Vec::new();
        for r in 0..n_red {
            if slack_source[r].is_none() {
                pos[r] = Some(unknown_rep.len());
                unknown_rep.push(r);
            }
        }

        let mut y_diag = vec![C64::new(0.0, 0.0); n_red];
        for (b, y) in net.constant_admittance().into_iter().enumerate() {
            y_diag[rep[b]] += y;
        }
        let mut off: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); n_red];
        let mut add = |r: usize, c: usize, y: C64, y_diag: &mut Vec<C64>| {
            if r == c {
                y_diag[r] += y;
            } else {
                *off[r].entry(c).or_insert(C64::new(0.0, 0.0)) += y;
            }
        };
        for (k, br) in net.branches().iter().enumerate() {
            if br.is_zero_impedance() {
                continue;
            }
            let yb = branch_admittance(&br.z).ok_or_else(|| PowerFlowError::SingularBranch(format!("{} -> {}", br.from, br.to)))?;
            let ph = br.phases.to_vec();
            for (p, &pp) in ph.iter().enumerate() {
                for (q, &qq) in ph.iter().enumerate() {
                    let fp = rep[bus(topo.from_node[k], pp)];
                    let fq = rep[bus(topo.from_node[k], qq)];
                    let tp = rep[bus(topo.to_node[k], pp)];
                    let tq = rep[bus(topo.to_node[k], qq)];
                    let y = yb[(p, q)];
                    add(fp, fq, y, &mut y_diag);
                    add(tp, tq, y, &mut y_diag);
                    add(fp, tq, -y, &mut y_diag);
                    add(tp, fq, -y, &mut y_diag);
                }
            }
        }
        let y_off = off.into_iter().map(|m| m.into_iter().filter(|(_, y)| y.norm() > 0.0).collect()).collect();
        Ok(PowerFlowModel {
            n_bus: nb,
            rep,
            pos,
            slack_source,
            angle,
            root_buses,
            root_phase_angle,
            y_diag,
            y_off,
            unknown_rep,
        })
    }

    pub fn n_bus(&self) -> usize {
        self.n_bus
    }

    /// Number of `(|V|, θ)` pairs solved for.
    pub fn n_unknown(&self) -> usize {
        self.unknown_rep.len()
    }

    /// Newton position of a network bus, `None` if tied to the substation.
    pub fn unknown_of_bus(&self, bus: usize) -> Option<usize> {
        self.pos[self.rep[bus]]
    }

    pub fn root_buses(&self) -> &[usize] {
        &self.root_buses
    }

    /// Balanced substation phasors `|V0| e^{jθφ}`.
    pub fn balanced_slack(&self, slack_v: f64) -> Vec<C64> {
        self.root_phase_angle.iter().map(|a| C64::from_polar(slack_v, *a)).collect()
    }

    fn reduced_injection(&self, injection: &[C64]) -> Vec<C64> {
        let mut s = vec![C64::new(0.0, 0.0); self.pos.len()];
        for (b, v) in injection.iter().enumerate() {
            s[self.rep[b]] += v;
        }
        s
    }

    fn diag_with(&self, extra_y: Option<&[C64]>) -> Vec<C64> {
        let mut d = self.y_diag.clone();
        if let Some(extra) = extra_y {
            for (b, y) in extra.iter().enumerate() {
                d[self.rep[b]] += y;
            }
        }
        d
    }

    /// Flat start: every bus at the slack magnitude with balanced angles.
    pub fn flat_unknowns(&self, slack_v: f64) -> DVector<f64> {
        let n = self.n_unknown();
        let mut x = DVector::zeros(2 * n);
        for (k, &r) in self.unknown_rep.iter().enumerate() {
            x[k] = slack_v;
            x[n + k] = self.angle[r];
        }
        x
    }

    pub fn unknowns_of(&self, state: &PowerFlowState) -> DVector<f64> {
        let n = self.n_unknown();
        let mut x = DVector::zeros(2 * n);
        for b in 0..self.n_bus {
            if let Some(k) = self.unknown_of_bus(b) {
                x[k] = state.v[b];
                x[n + k] = state.theta[b];
            }
        }
        x
    }

    fn phasors(&self, x: &DVector<f64>, slack: &[C64]) -> Vec<C64> {
        let n = self.n_unknown();
        let mut v = vec![C64::new(0.0, 0.0); self.pos.len()];
        for (r, vr) in v.iter_mut().enumerate() {
            *vr = match (self.pos[r], self.slack_source[r]) {
                (Some(k), _) => C64::from_polar(x[k], x[n + k]),
                (None, Some(b)) => slack[self.root_buses.iter().position(|&rb| rb == b).unwrap()],
                (None, None) => unreachable!(),
            };
        }
        v
    }

    fn currents(&self, v: &[C64], diag: &[C64]) -> Vec<C64> {
        (0..v.len())
            .map(|r| diag[r] * v[r] + self.y_off[r].iter().map(|(c, y)| *y * v[*c]).sum::<C64>())
            .collect()
    }

    /// Power mismatch `S_calc − S_inj` at the unknown buses, stacked `[P; Q]`.
    pub fn mismatch_at(&self, x: &DVector<f64>, slack: &[C64], injection: &[C64], extra_y: Option<&[C64]>) -> DVector<f64> {
        let v = self.phasors(x, slack);
        let cur = self.currents(&v, &self.diag_with(extra_y));
        let s_inj = self.reduced_injection(injection);
        let n = self.n_unknown();
        let mut f = DVector::zeros(2 * n);
        for (k, &r) in self.unknown_rep.iter().enumerate() {
            let s = v[r] * cur[r].conj() - s_inj[r];
            f[k] = s.re;
            f[n + k] = s.im;
        }
        f
    }

    /// `∂(p, q)/∂(|V|, θ)` over the unknown buses; rows `[P; Q]`, columns `[|V|; θ]`.
    pub fn jacobian_at(&self, x: &DVector<f64>, slack: &[C64], extra_y: Option<&[C64]>) -> DMatrix<f64> {
        let diag = self.diag_with(extra_y);
        let v = self.phasors(x, slack);
        let cur = self.currents(&v, &diag);
        let n = self.n_unknown();
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        let j_unit = C64::new(0.0, 1.0);
        for (i, &r) in self.unknown_rep.iter().enumerate() {
            let vr = v[r];
            let vm = vr.norm();
            let self_term = vr * (diag[r] * vr).conj();
            let s = vr * cur[r].conj();
            let ds_dth = j_unit * (s - self_term);
            let ds_dv = (s + self_term) / vm;
            j[(i, i)] = ds_dv.re;
            j[(n + i, i)] = ds_dv.im;
            j[(i, n + i)] = ds_dth.re;
            j[(n + i, n + i)] = ds_dth.im;
            for &(c, y) in &self.y_off[r] {
                let Some(k) = self.pos[c] else { continue };
                let t = vr * (y * v[c]).conj();
                let ds_dv = t / v[c].norm();
                let ds_dth = -j_unit * t;
                j[(i, k)] += ds_dv.re;
                j[(n + i, k)] += ds_dv.im;
                j[(i, n + k)] += ds_dth.re;
                j[(n + i, n + k)] += ds_dth.im;
            }
        }
        j
    }

    pub fn state_from(&self, x: &DVector<f64>, slack: &[C64], slack_v: f64) -> PowerFlowState {
        let v = self.phasors(x, slack);
        let mut mag = vec![0.0; self.n_bus];
        let mut ang = vec![0.0; self.n_bus];
        for b in 0..self.n_bus {
            mag[b] = v[self.rep[b]].norm();
            ang[b] = v[self.rep[b]].arg();
        }
        PowerFlowState { v: mag, theta: ang, slack_voltage: slack_v, iterations: 0, mismatch: 0.0 }
    }

    /// Newton's method from `start` (flat start when `None`).
    pub fn solve(
        &self,
        injection: &[C64],
        slack: &[C64],
        extra_y: Option<&[C64]>,
        start: Option<&PowerFlowState>,
        opts: &PowerFlowOptions,
    ) -> Result<PowerFlowState, PowerFlowError> {
        let mut cache = None;
        self.solve_cached(injection, slack, extra_y, start, opts, &mut cache)
    }

    /// Newton solve that may reuse the factored Jacobian kept in `cache`.
    /// The factorization is refreshed whenever a step contracts the mismatch
    /// by less than half.
    pub fn solve_cached(
        &self,
        injection: &[C64],
        slack: &[C64],
        extra_y: Option<&[C64]>,
        start: Option<&PowerFlowState>,
        opts: &PowerFlowOptions,
        cache: &mut Option<LU<f64, Dyn, Dyn>>,
    ) -> Result<PowerFlowState, PowerFlowError> {
        if injection.len() != self.n_bus || extra_y.is_some_and(|y| y.len() != self.n_bus) {
            return Err(PowerFlowError::Dimension(format!("expected {} bus values", self.n_bus)));
        }
        if slack.len() != self.root_buses.len() {
            return Err(PowerFlowError::Dimension(format!("expected {} slack phasors", self.root_buses.len())));
        }
        let slack_v = slack.first().map(|v| v.norm()).unwrap_or(1.0);
        let mut x = match start {
            Some(s) => self.unknowns_of(s),
            None => self.flat_unknowns(slack_v),
        };
        if !opts.reuse_jacobian {
            *cache = None;
        }
        let mut fresh = false;
        let mut last = f64::INFINITY;
        for it in 0..=opts.max_iter {
            let f = self.mismatch_at(&x, slack, injection, extra_y);
            let norm = f.amax();
            if !norm.is_finite() {
                break;
            }
            if norm <= opts.tol {
                let mut st = self.state_from(&x, slack, slack_v);
                st.iterations = it;
                st.mismatch = norm;
                return Ok(st);
            }
            if it == opts.max_iter {
                last = norm;
                break;
            }
            if cache.is_none() || (!fresh && norm > 0.5 * last) || !opts.reuse_jacobian {
                let lu = self.jacobian_at(&x, slack, extra_y).lu();
                if !lu.is_invertible() {
                    return Err(PowerFlowError::SingularJacobian);
                }
                *cache = Some(lu);
                fresh = true;
            } else {
                fresh = false;
            }
            let dx = cache.as_ref().unwrap().solve(&f).ok_or(PowerFlowError::SingularJacobian)?;
            x -= dx;
            last = norm;
        }
        Err(PowerFlowError::NotConverged { iterations: opts.max_iter, mismatch: last })
    }
}
