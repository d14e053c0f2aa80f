//! Newton–Raphson unbalanced power flow in polar coordinates, Jacobian
//! assembly and voltage-magnitude sensitivities.

mod model;
mod sensitivity;

use nalgebra::DMatrix;
use thiserror::Error;

pub use model::PowerFlowModel;
pub use sensitivity::{compute_sensitivities, SensitivityTensor, MAX_CONDITION};

use crate::netmodel::{NetworkError, NetworkModel, Topology, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("power flow did not converge in {iterations} iterations (mismatch {mismatch:.3e} pu)")]
    NotConverged { iterations: usize, mismatch: f64 },
    #[error("singular power-flow Jacobian")]
    SingularJacobian,
    #[error("Jacobian is ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("branch {0} has a singular impedance matrix")]
    SingularBranch(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowOptions {
    /// ∞-norm complex-power mismatch tolerance (pu).
    pub tol: f64,
    pub max_iter: usize,
    /// Keep a factored Jacobian across iterations and solves while it still
    /// contracts the mismatch fast enough.
    pub reuse_jacobian: bool,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions { tol: 1e-8, max_iter: 50, reuse_jacobian: false }
    }
}

/// Converged operating point, one entry per network bus.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub slack_voltage: f64,
    pub iterations: usize,
    /// Final ∞-norm mismatch (pu).
    pub mismatch: f64,
}

impl PowerFlowState {
    pub fn phasors(&self) -> Vec<C64> {
        self.v.iter().zip(&self.theta).map(|(m, a)| C64::from_polar(*m, *a)).collect()
    }
}

/// Solves the power flow with a balanced slack of magnitude `slack_v`.
///
/// `injection` is generation minus constant-power load per bus (pu);
/// constant-impedance loads and shunts of `net` are part of the admittance.
pub fn solve_power_flow(net: &NetworkModel, injection: &[C64], slack_v: f64) -> Result<PowerFlowState, PowerFlowError> {
    let model = PowerFlowModel::new(net)?;
    model.solve(injection, &model.balanced_slack(slack_v), None, None, &PowerFlowOptions::default())
}

/// Jacobian `∂(p, q)/∂(|V|, θ)` over the non-slack buses at `state`.
pub fn assemble_jacobian(net: &NetworkModel, state: &PowerFlowState) -> Result<DMatrix<f64>, PowerFlowError> {
    let model = PowerFlowModel::new(net)?;
    let x = model.unknowns_of(state);
    Ok(model.jacobian_at(&x, &model.balanced_slack(state.slack_voltage), None))
}

/// Branch currents and losses at a solved state.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlows {
    /// Per-branch, per-phase current from `from` to `to` (pu).
    pub current: Vec<Vec<C64>>,
    /// Per-branch series loss `Σ (V_from − V_to) conj(I)` (pu).
    pub loss: Vec<C64>,
    /// Complex power delivered by the substation on each of its phases.
    pub substation: Vec<C64>,
}

/// Computes branch flows by a backward sweep: currents of branches with
/// impedance come from the voltage drop, zero-impedance branches carry their
/// subtree's current.
pub fn branch_flows(
    net: &NetworkModel,
    state: &PowerFlowState,
    injection: &[C64],
    extra_y: Option<&[C64]>,
) -> Result<BranchFlows, PowerFlowError> {
    let topo = Topology::new(net)?;
    let v = state.phasors();
    let mut y = net.constant_admittance();
    if let Some(extra) = extra_y {
        for (a, b) in y.iter_mut().zip(extra) {
            *a += b;
        }
    }
    let consumption = |b: usize| y[b] * v[b] - (injection[b] / v[b]).conj();
    let nbr = net.branches().len();
    let mut current: Vec<Vec<C64>> = vec![Vec::new(); nbr];
    let mut loss = vec![C64::new(0.0, 0.0); nbr];
    // current drawn by each phase of a node's subtree, gathered from its child branches
    let outflow = |node: usize, phase, current: &Vec<Vec<C64>>| -> C64 {
        topo.children[node]
            .iter()
            .filter_map(|&k| net.branches()[k].phases.position(phase).map(|p| current[k][p]))
            .sum()
    };
    for &t in topo.order.iter().rev() {
        let Some(k) = topo.parent_branch[t] else { continue };
        let br = &net.branches()[k];
        let f = topo.from_node[k];
        let bus = |node, phase| net.bus_index(node, phase).unwrap();
        let phases = br.phases.to_vec();
        let cur: Vec<C64> = if br.is_zero_impedance() {
            phases.iter().map(|&p| consumption(bus(t, p)) + outflow(t, p, &current)).collect()
        } else {
            let yb = model::branch_admittance(&br.z).ok_or_else(|| PowerFlowError::SingularBranch(format!("{} -> {}", br.from, br.to)))?;
            let dv: Vec<C64> = phases.iter().map(|&p| v[bus(f, p)] - v[bus(t, p)]).collect();
            let cur: Vec<C64> = (0..phases.len()).map(|r| (0..phases.len()).map(|c| yb[(r, c)] * dv[c]).sum()).collect();
            loss[k] = dv.iter().zip(&cur).map(|(d, i)| d * i.conj()).sum();
            cur
        };
        current[k] = cur;
    }
    let root = topo.root;
    let substation = net
        .nodes()[root]
        .phases
        .iter()
        .map(|p| {
            let b = net.bus_index(root, p).unwrap();
            v[b] * (consumption(b) + outflow(root, p, &current)).conj()
        })
        .collect();
    Ok(BranchFlows { current, loss, substation })
}
