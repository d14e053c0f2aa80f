//! Serializable SI description of a feeder, as stored in feeder files.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::splitphase::expand_si;
use super::{
    Branch, CMatrix, Der, Load, NetworkError, NetworkModel, Node, NodeBase, NodeKind, PerUnitSystem,
    Phase, PhaseSet, Side, SplitPhaseTransformer, TriplexLine, UnitSystem, C64,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    /// Three-phase base apparent power (VA).
    pub s_b: f64,
    /// Primary base line-to-neutral voltage used when a node has no entry in `vb_ln`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vb_ln_default: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vb_ln: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    /// Required for primary nodes; secondary nodes inherit their transformer's phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhaseSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmax: Option<f64>,
    /// Per-phase shunt admittance (S) as `[g, b]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shunt_s: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub from: String,
    pub to: String,
    pub phases: PhaseSet,
    /// Row-major phase resistance and reactance matrices (Ω).
    pub r_ohm: Vec<Vec<f64>>,
    pub x_ohm: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ampacity_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerSpec {
    pub id: String,
    pub primary_node: String,
    pub secondary_node: String,
    pub phase: Phase,
    /// Complex impedances as `[r, x]` (Ω); `z0` primary-referred, `z1`/`z2` secondary-referred.
    pub z0_ohm: [f64; 2],
    pub z1_ohm: [f64; 2],
    pub z2_ohm: [f64; 2],
    /// Primary-referred core elements (Ω); omitted means absent (infinite).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rc_ohm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xm_ohm: Option<f64>,
    pub vbp_ln: f64,
    pub vbs_ln: f64,
    pub rating_va: f64,
}

impl TransformerSpec {
    pub fn to_model(&self) -> SplitPhaseTransformer {
        SplitPhaseTransformer {
            id: self.id.clone(),
            primary_node: self.primary_node.clone(),
            secondary_node: self.secondary_node.clone(),
            phase: self.phase,
            z0: complex(self.z0_ohm),
            z1: complex(self.z1_ohm),
            z2: complex(self.z2_ohm),
            rc: self.rc_ohm.unwrap_or(f64::INFINITY),
            xm: self.xm_ohm.unwrap_or(f64::INFINITY),
            vbp_ln: self.vbp_ln,
            vbs_ln: self.vbs_ln,
            rating: self.rating_va,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriplexSpec {
    pub from: String,
    pub to: String,
    pub z1_ohm: [f64; 2],
    pub z2_ohm: [f64; 2],
    pub length_m: f64,
}

impl TriplexSpec {
    pub fn to_model(&self) -> TriplexLine {
        TriplexLine {
            from: self.from.clone(),
            to: self.to.clone(),
            z1: complex(self.z1_ohm),
            z2: complex(self.z2_ohm),
            length: self.length_m,
        }
    }
}

/// Per-phase load in W / var, with an optional constant-admittance part in S.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhaseSet>,
    pub p_w: Vec<f64>,
    pub q_var: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub g_s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerSpec {
    pub id: String,
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhaseSet>,
    #[serde(default)]
    pub p_min_w: f64,
    pub p_max_w: f64,
    /// Default ±44 % of the rating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min_var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max_var: Option<f64>,
    pub s_rated_va: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederDescription {
    pub base: BaseSpec,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub branches: Vec<BranchSpec>,
    #[serde(default)]
    pub split_phase_transformers: Vec<TransformerSpec>,
    #[serde(default)]
    pub triplex_lines: Vec<TriplexSpec>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    #[serde(default)]
    pub ders: Vec<DerSpec>,
}

fn complex(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn is_secondary(kind: NodeKind) -> bool {
    matches!(kind, NodeKind::Secondary | NodeKind::ServicePoint | NodeKind::TransformerCore)
}

impl FeederDescription {
    /// Builds the SI network with every split-phase transformer expanded.
    pub fn build_si(&self) -> Result<NetworkModel, NetworkError> {
        let mut pu = PerUnitSystem::new(self.base.s_b);
        let primary_base = |id: &str| {
            self.base
                .vb_ln
                .get(id)
                .copied()
                .or(self.base.vb_ln_default)
                .ok_or_else(|| NetworkError::MissingBase(id.to_string()))
        };
        let specs: BTreeMap<&str, &NodeSpec> = self.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        if specs.len() != self.nodes.len() {
            let mut seen = HashSet::new();
            let dup = self.nodes.iter().find(|n| !seen.insert(n.id.as_str())).unwrap();
            return Err(NetworkError::InvalidElement(format!("duplicate node '{}'", dup.id)));
        }

        let mut nodes = Vec::new();
        for spec in self.nodes.iter().filter(|n| !is_secondary(n.kind)) {
            let phases = spec
                .phases
                .ok_or_else(|| NetworkError::InvalidPhases(format!("node '{}' has no phases", spec.id)))?;
            nodes.push(apply_node_spec(Node::new(spec.id.clone(), phases, spec.kind), spec)?);
            pu.insert(spec.id.clone(), NodeBase { v_ln: primary_base(&spec.id)?, side: Side::Primary });
        }

        let mut branches = Vec::new();
        for b in &self.branches {
            branches.push(branch_from_spec(b)?);
        }

        let mut loads = Vec::new();
        let mut assigned = vec![false; self.triplex_lines.len()];
        let mut created: HashSet<String> = HashSet::new();
        for t in &self.split_phase_transformers {
            let model = t.to_model();
            if let Some(b) = pu.base(&t.primary_node) {
                if (b.v_ln - t.vbp_ln).abs() > 1e-9 * b.v_ln {
                    return Err(NetworkError::InvalidTransformer {
                        id: t.id.clone(),
                        reason: format!("primary base {} V differs from node base {} V", t.vbp_ln, b.v_ln),
                    });
                }
            }
            // triplex segments reachable from this transformer's terminal node
            let mut reach: HashSet<&str> = HashSet::from([t.secondary_node.as_str()]);
            let mut mine = Vec::new();
            loop {
                let before = mine.len();
                for (k, tl) in self.triplex_lines.iter().enumerate() {
                    if !assigned[k] && reach.contains(tl.from.as_str()) {
                        assigned[k] = true;
                        reach.insert(tl.to.as_str());
                        mine.push(tl.to_model());
                    }
                }
                if mine.len() == before {
                    break;
                }
            }
            let (exp, bases) = expand_si(&model, &mine)?;
            for n in exp.nodes {
                if !created.insert(n.id.clone()) || specs.get(n.id.as_str()).is_some_and(|s| !is_secondary(s.kind)) {
                    return Err(NetworkError::InvalidElement(format!("node '{}' is defined twice", n.id)));
                }
                let node = match specs.get(n.id.as_str()) {
                    Some(spec) => {
                        if spec.phases.is_some_and(|p| p != n.phases) {
                            return Err(NetworkError::InvalidPhases(format!(
                                "secondary node '{}' must carry phase {} of transformer '{}'",
                                n.id, t.phase, t.id
                            )));
                        }
                        let mut node = apply_node_spec(n, spec)?;
                        if spec.kind != NodeKind::TransformerCore {
                            node.kind = spec.kind;
                        }
                        node
                    }
                    None => n,
                };
                nodes.push(node);
            }
            for (id, b) in bases {
                pu.insert(id, b);
            }
            branches.extend(exp.branches);
            loads.extend(exp.core_load);
        }
        if let Some(k) = assigned.iter().position(|a| !a) {
            let t = &self.triplex_lines[k];
            return Err(NetworkError::InvalidElement(format!(
                "triplex {} -> {} is not fed by any split-phase transformer",
                t.from, t.to
            )));
        }
        if let Some(s) = self.nodes.iter().find(|n| is_secondary(n.kind) && !created.contains(&n.id)) {
            return Err(NetworkError::InvalidElement(format!(
                "secondary node '{}' is not served by any split-phase transformer",
                s.id
            )));
        }

        let node_phases = |id: &str| nodes.iter().find(|n| n.id == id).map(|n| n.phases);
        for l in &self.loads {
            let phases = match l.phases.or_else(|| node_phases(&l.node)) {
                Some(p) => p,
                None => return Err(NetworkError::UnknownNode(l.node.clone())),
            };
            let n = phases.len();
            let dims_ok = l.p_w.len() == n
                && l.q_var.len() == n
                && (l.g_s.is_empty() || l.g_s.len() == n)
                && (l.b_s.is_empty() || l.b_s.len() == n);
            if !dims_ok {
                return Err(NetworkError::InvalidElement(format!("load at '{}' has per-phase arrays of the wrong length", l.node)));
            }
            let s = l.p_w.iter().zip(&l.q_var).map(|(p, q)| C64::new(*p, *q)).collect();
            let y = (0..n)
                .map(|k| C64::new(l.g_s.get(k).copied().unwrap_or(0.0), l.b_s.get(k).copied().unwrap_or(0.0)))
                .collect();
            loads.push(Load { y_const: y, ..Load::constant_power(l.node.clone(), phases, s) });
        }

        let mut ders = Vec::new();
        for d in &self.ders {
            let phases = match d.phases.or_else(|| node_phases(&d.node)) {
                Some(p) => p,
                None => return Err(NetworkError::UnknownNode(d.node.clone())),
            };
            let inv = Der::inverter(d.id.clone(), d.node.clone(), phases, d.p_max_w, d.s_rated_va);
            ders.push(Der {
                p_min: d.p_min_w,
                q_min: d.q_min_var.unwrap_or(inv.q_min),
                q_max: d.q_max_var.unwrap_or(inv.q_max),
                ..inv
            });
        }

        Ok(NetworkModel::new(nodes, branches, loads, ders, pu, UnitSystem::Si))
    }

    /// Builds the per-unit network used by all solvers.
    pub fn build(&self) -> Result<NetworkModel, NetworkError> {
        self.build_si()?.to_per_unit()
    }
}

fn apply_node_spec(mut node: Node, spec: &NodeSpec) -> Result<Node, NetworkError> {
    let n = node.phases.len();
    if let Some(v) = spec.vmin {
        node.vmin = vec![v; n];
    }
    if let Some(v) = spec.vmax {
        node.vmax = vec![v; n];
    }
    if let Some(sh) = &spec.shunt_s {
        if sh.len() != n {
            return Err(NetworkError::InvalidElement(format!("node '{}' shunt has {} entries for {} phases", spec.id, sh.len(), n)));
        }
        node.shunt = sh.iter().map(|v| complex(*v)).collect();
    }
    Ok(node)
}

fn branch_from_spec(b: &BranchSpec) -> Result<Branch, NetworkError> {
    let n = b.phases.len();
    let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
    if !square(&b.r_ohm) || !square(&b.x_ohm) {
        return Err(NetworkError::InvalidElement(format!(
            "branch {} -> {} impedance must be {n}x{n} for phases {}",
            b.from, b.to, b.phases
        )));
    }
    let z = CMatrix::from_fn(n, n, |i, j| C64::new(b.r_ohm[i][j], b.x_ohm[i][j]));
    let mut br = Branch::new(b.from.clone(), b.to.clone(), b.phases, z);
    if let Some(a) = b.ampacity_a {
        br.ampacity = vec![a; n];
    }
    Ok(br)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::validate_network;

    pub(crate) fn sample() -> FeederDescription {
        FeederDescription {
            base: BaseSpec { s_b: 1e6, vb_ln_default: Some(7200.0), vb_ln: BTreeMap::new() },
            nodes: vec![
                NodeSpec { id: "sub".into(), kind: NodeKind::Substation, phases: Some(PhaseSet::ABC), vmin: None, vmax: None, shunt_s: None },
                NodeSpec { id: "n1".into(), kind: NodeKind::MediumVoltage, phases: Some(PhaseSet::ABC), vmin: None, vmax: None, shunt_s: None },
                NodeSpec { id: "h1".into(), kind: NodeKind::ServicePoint, phases: None, vmin: Some(0.94), vmax: None, shunt_s: None },
            ],
            branches: vec![BranchSpec {
                from: "sub".into(),
                to: "n1".into(),
                phases: PhaseSet::ABC,
                r_ohm: vec![vec![0.3, 0.1, 0.1], vec![0.1, 0.3, 0.1], vec![0.1, 0.1, 0.3]],
                x_ohm: vec![vec![0.6, 0.2, 0.2], vec![0.2, 0.6, 0.2], vec![0.2, 0.2, 0.6]],
                ampacity_a: Some(400.0),
            }],
            split_phase_transformers: vec![TransformerSpec {
                id: "t1".into(),
                primary_node: "n1".into(),
                secondary_node: "t1s".into(),
                phase: Phase::C,
                z0_ohm: [6.0, 9.0],
                z1_ohm: [0.006, 0.005],
                z2_ohm: [0.006, 0.005],
                rc_ohm: Some(5e5),
                xm_ohm: Some(2e5),
                vbp_ln: 7200.0,
                vbs_ln: 120.0,
                rating_va: 25e3,
            }],
            triplex_lines: vec![TriplexSpec { from: "t1s".into(), to: "h1".into(), z1_ohm: [0.02, 0.01], z2_ohm: [0.02, 0.01], length_m: 30.0 }],
            loads: vec![LoadSpec { node: "h1".into(), phases: None, p_w: vec![4000.0], q_var: vec![1000.0], g_s: vec![], b_s: vec![] }],
            ders: vec![DerSpec { id: "pv1".into(), node: "h1".into(), phases: None, p_min_w: 0.0, p_max_w: 5000.0, q_min_var: None, q_max_var: None, s_rated_va: 5500.0 }],
        }
    }

    #[test]
    fn builds_expanded_valid_network() {
        let net = sample().build().unwrap();
        assert!(validate_network(&net).is_empty(), "{:?}", validate_network(&net));
        assert_eq!(net.nodes().len(), 5);
        assert_eq!(net.node("t1:core").unwrap().kind, NodeKind::TransformerCore);
        let h1 = net.node("h1").unwrap();
        assert_eq!(h1.phases, PhaseSet::single(Phase::C));
        assert_eq!(h1.vmin, vec![0.94]);
        // 4 kW on the S_b/3 power base
        assert!((net.loads().iter().find(|l| l.node == "h1").unwrap().s_pq[0].re - 0.012).abs() < 1e-15);
        assert!((net.ders()[0].q_max - 0.44 * 5500.0 * 3.0 / 1e6).abs() < 1e-15);
    }

    #[test]
    fn orphan_secondary_is_rejected() {
        let mut f = sample();
        f.split_phase_transformers.clear();
        assert!(f.build().is_err());
    }
}
