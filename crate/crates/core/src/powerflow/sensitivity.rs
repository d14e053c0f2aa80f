use nalgebra::DMatrix;

use super::{PowerFlowError, PowerFlowModel, PowerFlowOptions, PowerFlowState};
use crate::netmodel::{NetworkModel, C64};

/// Jacobians whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// `∂|V|/∂p` and `∂|V|/∂q` over the non-substation buses.
#[derive(Debug, Clone)]
pub struct SensitivityTensor {
    /// Network bus index of each row/column, canonical order.
    pub buses: Vec<usize>,
    pub dv_dp: DMatrix<f64>,
    pub dv_dq: DMatrix<f64>,
    pub operating_point: PowerFlowState,
}

impl SensitivityTensor {
    /// Row/column of a network bus, `None` for substation buses.
    pub fn index_of(&self, bus: usize) -> Option<usize> {
        self.buses.binary_search(&bus).ok()
    }

    pub fn from_model(model: &PowerFlowModel, net: &NetworkModel, state: PowerFlowState) -> Result<SensitivityTensor, PowerFlowError> {
        let root = net.substation().ok_or_else(|| PowerFlowError::Dimension("no substation".into()))?;
        let buses: Vec<usize> = (0..net.buses().len()).filter(|&b| net.buses()[b].node != root).collect();
        let m = buses.len();
        let n = model.n_unknown();
        let mut dv_dp = DMatrix::zeros(m, m);
        let mut dv_dq = DMatrix::zeros(m, m);
        if n > 0 {
            let x = model.unknowns_of(&state);
            let j = model.jacobian_at(&x, &model.balanced_slack(state.slack_voltage), None);
            let inv = j.clone().try_inverse().ok_or(PowerFlowError::SingularJacobian)?;
            let cond = one_norm(&j) * one_norm(&inv);
            if !cond.is_finite() || cond > MAX_CONDITION {
                return Err(PowerFlowError::IllConditioned(cond));
            }
            let pos: Vec<Option<usize>> = buses.iter().map(|&b| model.unknown_of_bus(b)).collect();
            for (r, pr) in pos.iter().enumerate() {
                let Some(pr) = *pr else { continue };
                for (c, pc) in pos.iter().enumerate() {
                    let Some(pc) = *pc else { continue };
                    dv_dp[(r, c)] = inv[(pr, pc)];
                    dv_dq[(r, c)] = inv[(pr, n + pc)];
                }
            }
        }
        Ok(SensitivityTensor { buses, dv_dp, dv_dq, operating_point: state })
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Sensitivities at the operating point reached with `injection` and a
/// balanced slack of magnitude `slack_v`.
pub fn compute_sensitivities(net: &NetworkModel, injection: &[C64], slack_v: f64) -> Result<SensitivityTensor, PowerFlowError> {
    let model = PowerFlowModel::new(net)?;
    let state = model.solve(injection, &model.balanced_slack(slack_v), None, None, &PowerFlowOptions::default())?;
    SensitivityTensor::from_model(&model, net, state)
}
