//! Exactness certificate, phasor recovery and dispatch extraction.

use nalgebra::{DMatrix, SymmetricEigen};

use super::assemble::{AssembledOpf, NodeVoltage};
use super::conic::{RawSolution, RawStatus};
use super::{OpfError, OpfOptions};
use crate::netmodel::{CMatrix, NetworkModel, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpfStatus {
    /// Every branch block is numerically rank one.
    Exact,
    Inexact,
    Infeasible,
    /// Exact, after scaling the voltage margins by the given factor.
    MarginDegraded(f64),
}

impl OpfStatus {
    pub fn is_exact(self) -> bool {
        matches!(self, OpfStatus::Exact | OpfStatus::MarginDegraded(_))
    }

    pub fn label(self) -> String {
        match self {
            OpfStatus::Exact => "exact".into(),
            OpfStatus::Inexact => "inexact".into(),
            OpfStatus::Infeasible => "infeasible".into(),
            OpfStatus::MarginDegraded(g) => format!("margin-degraded({g})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub backend: &'static str,
    pub raw_status: RawStatus,
    pub iterations: u32,
    pub solve_time: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone)]
pub struct OpfSolution {
    pub status: OpfStatus,
    /// Real power supplied by the substation (pu, may be negative).
    pub objective: f64,
    /// Substation voltage magnitude `|V0|` (pu).
    pub v0: f64,
    pub node_v: Vec<CMatrix>,
    pub branch_s: Vec<CMatrix>,
    pub branch_l: Vec<CMatrix>,
    /// Per DER, per phase `(p, q)` (pu).
    pub der: Vec<Vec<(f64, f64)>>,
    /// Substation injection per substation phase (pu).
    pub s0: Vec<C64>,
    /// `λ₂/λ₁` of each branch block (zero for zero-impedance branches).
    pub rank_residuals: Vec<f64>,
    /// Per-bus voltage phasors; present only for exact solutions.
    pub phasors: Option<Vec<C64>>,
    pub solver: SolverReport,
}

impl OpfSolution {
    pub fn max_rank_residual(&self) -> f64 {
        self.rank_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// `λ₂/λ₁` of a Hermitian matrix (eigenvalues in decreasing order).
pub fn rank_residual(m: &CMatrix) -> f64 {
    if m.nrows() < 2 {
        return 0.0;
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= 0.0 {
        return 0.0;
    }
    ev[1].max(0.0) / ev[0]
}

/// Scaled principal eigenvector `√λ₁ u₁` with its first entry made real.
pub fn rank_one_factor(m: &CMatrix) -> Vec<C64> {
    let eig = SymmetricEigen::new(m.clone());
    let (k, lam) = eig.eigenvalues.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let u = eig.eigenvectors.column(k);
    let rot = if u[0].norm() > 0.0 { u[0].conj() / u[0].norm() } else { C64::new(1.0, 0.0) };
    u.iter().map(|x| x * rot * lam.max(0.0).sqrt()).collect()
}

fn block(v: &CMatrix, s: &CMatrix, l: &CMatrix) -> CMatrix {
    let n = s.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| match (r < n, c < n) {
        (true, true) => v[(r, c)],
        (true, false) => s[(r, c - n)],
        (false, true) => s[(c, r - n)].conj(),
        (false, false) => l[(r - n, c - n)],
    })
}

/// Reads the solver's primal point, certifies exactness branch by branch,
/// and recovers phasors root-to-leaf for exact solutions.
pub fn check_rank_and_recover(
    net: &NetworkModel,
    assembled: &AssembledOpf,
    raw: &RawSolution,
    backend: &'static str,
    opts: &OpfOptions,
) -> Result<OpfSolution, OpfError> {
    let report = SolverReport {
        backend,
        raw_status: raw.status,
        iterations: raw.iterations,
        solve_time: raw.solve_time,
        primal_residual: raw.primal_residual,
        dual_residual: raw.dual_residual,
    };
    let lay = &assembled.layout;
    match raw.status {
        RawStatus::PrimalInfeasible => {
            return Ok(OpfSolution {
                status: OpfStatus::Infeasible,
                objective: f64::NAN,
                v0: f64::NAN,
                node_v: vec![],
                branch_s: vec![],
                branch_l: vec![],
                der: vec![],
                s0: vec![],
                rank_residuals: vec![],
                phasors: None,
                solver: report,
            })
        }
        RawStatus::DualInfeasible => return Err(OpfError::Solver("problem is unbounded".into())),
        RawStatus::Inaccurate => log::debug!("conic solver converged to reduced accuracy"),
        RawStatus::Optimal => {}
    }
    let x = &raw.x;
    let node_v: Vec<CMatrix> = lay.node_v.iter().map(|v| v.value(x)).collect();
    let branch_s: Vec<CMatrix> = (0..net.branches().len()).map(|k| lay.s_value(k, x)).collect();
    let branch_l: Vec<CMatrix> = lay.branch_l.iter().map(|h| h.value(x)).collect();
    let der = lay.der.iter().map(|d| d.iter().map(|&(p, q)| (x[p], x[q])).collect()).collect();
    let s0 = lay.s0.iter().map(|&(p, q)| C64::new(x[p], x[q])).collect();
    let topo = &lay.topology;
    let root = topo.root;
    let v0 = match &lay.node_v[root] {
        NodeVoltage::Balanced { w0, .. } => x[*w0].max(0.0).sqrt(),
        NodeVoltage::Free(_) => node_v[root][(0, 0)].re.max(0.0).sqrt(),
    };

    let mut rank_residuals = Vec::with_capacity(net.branches().len());
    for (k, br) in net.branches().iter().enumerate() {
        if br.is_zero_impedance() {
            rank_residuals.push(0.0);
            continue;
        }
        let vi = projected(net, &node_v[topo.from_node[k]], topo.from_node[k], k);
        rank_residuals.push(rank_residual(&block(&vi, &branch_s[k], &branch_l[k])));
    }
    let max_res = rank_residuals.iter().copied().fold(0.0, f64::max);
    let exact = max_res <= opts.rank_tol;

    let phasors = exact.then(|| {
        let mut u = vec![C64::new(0.0, 0.0); net.buses().len()];
        let root_u: Vec<C64> = match &lay.node_v[root] {
            NodeVoltage::Balanced { angles, .. } => angles.iter().map(|a| C64::from_polar(v0, *a)).collect(),
            NodeVoltage::Free(_) => rank_one_factor(&node_v[root]),
        };
        for (p, phase) in net.nodes()[root].phases.iter().enumerate() {
            u[net.bus_index(root, phase).unwrap()] = root_u[p];
        }
        for &j in &topo.order {
            let Some(k) = topo.parent_branch[j] else { continue };
            let br = &net.branches()[k];
            let i = topo.from_node[k];
            let vi: Vec<C64> = br.phases.iter().map(|p| u[net.bus_index(i, p).unwrap()]).collect();
            let norm2: f64 = vi.iter().map(|v| v.norm_sqr()).sum();
            let n = vi.len();
            let s = &branch_s[k];
            // I = Sᴴ v_i / ‖v_i‖², v_j = v_i − Z I
            let cur: Vec<C64> = (0..n).map(|r| (0..n).map(|c| s[(c, r)].conj() * vi[c]).sum::<C64>() / norm2).collect();
            for (r, phase) in br.phases.iter().enumerate() {
                let drop: C64 = (0..n).map(|c| br.z[(r, c)] * cur[c]).sum();
                u[net.bus_index(j, phase).unwrap()] = vi[r] - drop;
            }
        }
        u
    });

    Ok(OpfSolution {
        status: if exact { OpfStatus::Exact } else { OpfStatus::Inexact },
        objective: raw.objective,
        v0,
        node_v,
        branch_s,
        branch_l,
        der,
        s0,
        rank_residuals,
        phasors,
        solver: report,
    })
}

fn projected(net: &NetworkModel, v: &CMatrix, node: usize, k: usize) -> CMatrix {
    let pos: Vec<usize> = net.branches()[k].phases.iter().map(|p| net.nodes()[node].phases.position(p).unwrap()).collect();
    DMatrix::from_fn(pos.len(), pos.len(), |r, c| v[(pos[r], pos[c])])
}

/// Setpoints sent to the field for one dispatch window.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    /// Substation regulator setpoint `|V0|` (pu).
    pub v0: f64,
    /// Per DER, per phase `(p, q)` (pu).
    pub der: Vec<Vec<(f64, f64)>>,
}

impl Dispatch {
    /// DER at zero output and the substation at `v0`.
    pub fn idle(net: &NetworkModel, v0: f64) -> Dispatch {
        Dispatch { v0, der: net.ders().iter().map(|d| vec![(0.0, 0.0); d.phases.len()]).collect() }
    }
}

/// Projects `(p, q)` onto the box and rating disk of a DER phase.
pub fn project_setpoint(p: f64, q: f64, p_min: f64, p_max: f64, q_min: f64, q_max: f64, s_rated: f64) -> (f64, f64) {
    let mut p = p.clamp(p_min, p_max.max(p_min));
    let mut q = q.clamp(q_min, q_max);
    let mag = p.hypot(q);
    if mag > s_rated && mag > 0.0 {
        let f = s_rated / mag;
        p = (p * f).clamp(p_min, p_max.max(p_min));
        q = (q * f).clamp(q_min, q_max);
    }
    (p, q)
}

/// DER setpoints and regulator voltage of an exact solution, projected onto
/// the DER constraints to remove solver round-off. `p_max` overrides the
/// per-DER real-power caps as in assembly.
pub fn extract_dispatch(net: &NetworkModel, sol: &OpfSolution, p_max: Option<&[f64]>, opts: &OpfOptions) -> Result<Dispatch, OpfError> {
    if !sol.status.is_exact() {
        return Err(OpfError::NotExact(sol.status.label()));
    }
    let der = net
        .ders()
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let cap = p_max.map(|p| p[k]).unwrap_or(d.p_max);
            sol.der[k].iter().map(|&(p, q)| project_setpoint(p, q, d.p_min, cap, d.q_min, d.q_max, d.s_rated)).collect()
        })
        .collect();
    Ok(Dispatch { v0: sol.v0.clamp(opts.regulator.0, opts.regulator.1), der })
}
