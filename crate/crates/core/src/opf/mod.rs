//! Three-phase optimal power flow as a semidefinite relaxation of the branch
//! flow model, with exactness certification and phasor recovery.
//!
//! The decision variables are the per-node voltage matrices `V`, per-branch
//! power and current matrices `S` and `L`, DER injections and the substation
//! injection. The objective is the real power the substation supplies.

mod assemble;
mod conic;
mod expr;
mod recover;


use thiserror::Error;

pub use assemble::{assemble_opf, AssembledOpf, BranchPower, BusLoads, HermVars, NodeVoltage, OpfLayout};
pub use conic::{
    solver_by_name, solver_from_env, ClarabelSolver, Cone, ConicProblem, ConicSolver, RawSolution, RawStatus,
    SolverOptions, EXPORT_HEADER,
};
pub use expr::{CExpr, CExprMatrix, LinExpr};
pub use recover::{
    check_rank_and_recover, extract_dispatch, project_setpoint, rank_one_factor, rank_residual, Dispatch,
    OpfSolution, OpfStatus, SolverReport,
};

use crate::netmodel::{NetworkError, NetworkModel};
use crate::uncertainty::{default_voltage_limits, tightened_voltage_limits, VoltageLimits, VoltageMargin, MARGIN_LADDER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error("assembly failed at {constraint}: {reason}")]
    Assembly { constraint: String, reason: String },
    #[error("malformed conic problem: {0}")]
    Parse(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("solution is {0}, no dispatch available")]
    NotExact(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpfOptions {
    /// Force a balanced substation voltage; otherwise `V0` is a free PSD matrix.
    pub slack_balanced: bool,
    /// Achievable range of the substation regulator setpoint (pu).
    pub regulator: (f64, f64),
    pub solver: SolverOptions,
    /// Largest `λ₂/λ₁` accepted as rank one.
    pub rank_tol: f64,
}

impl Default for OpfOptions {
    fn default() -> Self {
        OpfOptions { slack_balanced: true, regulator: (0.95, 1.05), solver: SolverOptions::default(), rank_tol: 1e-5 }
    }
}

/// Assembles, solves and certifies one OPF instance.
pub fn solve_opf(
    net: &NetworkModel,
    loads: &BusLoads,
    p_max: Option<&[f64]>,
    limits: &VoltageLimits,
    opts: &OpfOptions,
    solver: &dyn ConicSolver,
) -> Result<OpfSolution, OpfError> {
    let assembled = assemble_opf(net, loads, p_max, limits, opts)?;
    let raw = solver.solve(&assembled.problem, &opts.solver)?;
    check_rank_and_recover(net, &assembled, &raw, solver.name(), opts)
}

/// Solves with limits tightened by `margins`. When the tightened limits
/// collapse or the problem is infeasible, the margins are scaled down along
/// [`MARGIN_LADDER`] and the result is marked
/// [`OpfStatus::MarginDegraded`].
pub fn solve_opf_with_margins(
    net: &NetworkModel,
    loads: &BusLoads,
    p_max: Option<&[f64]>,
    margins: &VoltageMargin,
    opts: &OpfOptions,
    solver: &dyn ConicSolver,
) -> Result<OpfSolution, OpfError> {
    let mut last = None;
    for gamma in std::iter::once(1.0).chain(MARGIN_LADDER) {
        let limits = if gamma == 1.0 {
            tightened_voltage_limits(net, margins)
        } else if gamma == 0.0 {
            Ok(default_voltage_limits(net))
        } else {
            tightened_voltage_limits(net, &margins.scaled(gamma))
        };
        let limits = match limits {
            Ok(l) => l,
            Err(e) => {
                log::warn!("{e}; degrading margins");
                continue;
            }
        };
        let mut sol = solve_opf(net, loads, p_max, &limits, opts, solver)?;
        if sol.status == OpfStatus::Infeasible {
            log::warn!("OPF infeasible with margins scaled by {gamma}");
            last = Some(sol);
            continue;
        }
        if gamma < 1.0 && sol.status == OpfStatus::Exact {
            sol.status = OpfStatus::MarginDegraded(gamma);
        }
        return Ok(sol);
    }
    Ok(last.expect("the unscaled ladder step always solves"))
}
