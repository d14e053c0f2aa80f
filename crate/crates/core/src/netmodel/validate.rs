use std::collections::HashSet;
use std::fmt;

use super::{NetworkModel, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    NotRadial,
    Disconnected,
    PhaseMismatch,
    UnknownNode,
    DuplicateNode,
    Substation,
    VoltageLimits,
    Impedance,
    Dimension,
    MissingBase,
    DerLimits,
}

impl DiagnosticKind {
    /// Problems that prevent building a tree topology at all.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            DiagnosticKind::NotRadial
                | DiagnosticKind::Disconnected
                | DiagnosticKind::UnknownNode
                | DiagnosticKind::DuplicateNode
                | DiagnosticKind::Substation
                | DiagnosticKind::Dimension
                | DiagnosticKind::PhaseMismatch
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            DiagnosticKind::NotRadial => "not radial",
            DiagnosticKind::Disconnected => "disconnected",
            DiagnosticKind::PhaseMismatch => "phase mismatch",
            DiagnosticKind::UnknownNode => "unknown node",
            DiagnosticKind::DuplicateNode => "duplicate node",
            DiagnosticKind::Substation => "substation",
            DiagnosticKind::VoltageLimits => "voltage limits",
            DiagnosticKind::Impedance => "impedance",
            DiagnosticKind::Dimension => "dimension",
            DiagnosticKind::MissingBase => "missing base",
            DiagnosticKind::DerLimits => "der limits",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.label(), self.message)
    }
}

/// Checks radiality, phase consistency, per-unit completeness and element
/// sanity. An empty result means the network is valid.
pub fn validate_network(net: &NetworkModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |kind, message: String| out.push(Diagnostic { kind, message });

    let mut seen = HashSet::new();
    for n in net.nodes() {
        if !seen.insert(n.id.as_str()) {
            push(DiagnosticKind::DuplicateNode, format!("node '{}' defined twice", n.id));
        }
        let np = n.phases.len();
        if n.vmin.len() != np || n.vmax.len() != np || n.shunt.len() != np {
            push(DiagnosticKind::Dimension, format!("node '{}' per-phase data does not match phases {}", n.id, n.phases));
        } else {
            for k in 0..np {
                if !(n.vmin[k] > 0.0 && n.vmin[k] < n.vmax[k]) {
                    push(
                        DiagnosticKind::VoltageLimits,
                        format!("node '{}' needs 0 < vmin < vmax, got [{}, {}]", n.id, n.vmin[k], n.vmax[k]),
                    );
                }
            }
        }
        if net.base().base(&n.id).is_none() {
            push(DiagnosticKind::MissingBase, format!("node '{}' has no base voltage", n.id));
        }
    }

    let subs: Vec<usize> = net
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.kind == NodeKind::Substation)
        .map(|(i, _)| i)
        .collect();
    if subs.len() != 1 {
        push(DiagnosticKind::Substation, format!("expected exactly one substation node, found {}", subs.len()));
    }

    let n = net.nodes().len();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for b in net.branches() {
        let (f, t) = match (net.node_index(&b.from), net.node_index(&b.to)) {
            (Some(f), Some(t)) => (f, t),
            _ => {
                let missing = if net.node_index(&b.from).is_none() { &b.from } else { &b.to };
                push(DiagnosticKind::UnknownNode, format!("branch {} -> {} references unknown node '{}'", b.from, b.to, missing));
                continue;
            }
        };
        let np = b.phases.len();
        if b.z.nrows() != np || b.z.ncols() != np || b.ampacity.len() != np {
            push(DiagnosticKind::Dimension, format!("branch {} -> {} impedance is not {}x{}", b.from, b.to, np, np));
        } else {
            for r in 0..np {
                if b.z[(r, r)].re < 0.0 {
                    push(DiagnosticKind::Impedance, format!("branch {} -> {} has negative resistance", b.from, b.to));
                }
                for c in 0..r {
                    let (x, y) = (b.z[(r, c)], b.z[(c, r)]);
                    if (x - y).norm() > 1e-12 * x.norm().max(y.norm()).max(1e-300) {
                        push(DiagnosticKind::Impedance, format!("branch {} -> {} impedance is not symmetric", b.from, b.to));
                    }
                }
            }
        }
        for node in [f, t] {
            if !b.phases.is_subset_of(net.nodes()[node].phases) {
                push(
                    DiagnosticKind::PhaseMismatch,
                    format!(
                        "branch {} -> {} phases {} not a subset of node '{}' phases {}",
                        b.from, b.to, b.phases, net.nodes()[node].id, net.nodes()[node].phases
                    ),
                );
            }
        }
        if net.nodes()[t].phases != b.phases && b.phases.is_subset_of(net.nodes()[t].phases) {
            push(
                DiagnosticKind::PhaseMismatch,
                format!("node '{}' has phases {} not fed by its branch ({})", net.nodes()[t].id, net.nodes()[t].phases, b.phases),
            );
        }
        if f == t {
            push(DiagnosticKind::NotRadial, format!("branch {} -> {} is a self-loop", b.from, b.to));
            continue;
        }
        if parent[t].is_some() {
            push(DiagnosticKind::NotRadial, format!("node '{}' is fed by more than one branch", b.to));
        } else {
            parent[t] = Some(f);
        }
        children[f].push(t);
    }

    if let [root] = subs[..] {
        if parent[root].is_some() {
            push(DiagnosticKind::NotRadial, format!("substation '{}' has an incoming branch", net.nodes()[root].id));
        }
        let mut reached = vec![false; n];
        let mut stack = vec![root];
        reached[root] = true;
        while let Some(i) = stack.pop() {
            for &c in &children[i] {
                if !reached[c] {
                    reached[c] = true;
                    stack.push(c);
                } else {
                    push(DiagnosticKind::NotRadial, format!("node '{}' reached twice", net.nodes()[c].id));
                }
            }
        }
        for i in 0..n {
            if reached[i] {
                continue;
            }
            // walk parent pointers; a loop among unreached nodes is a cycle
            let mut cur = i;
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                cur = p;
                steps += 1;
                if cur == i || steps > n {
                    push(DiagnosticKind::NotRadial, format!("node '{}' lies on a cycle", net.nodes()[i].id));
                    break;
                }
            }
            push(DiagnosticKind::Disconnected, format!("node '{}' is not connected to the substation", net.nodes()[i].id));
        }
    }

    for l in net.loads() {
        match net.node(&l.node) {
            None => push(DiagnosticKind::UnknownNode, format!("load references unknown node '{}'", l.node)),
            Some(node) => {
                if !l.phases.is_subset_of(node.phases) {
                    push(DiagnosticKind::PhaseMismatch, format!("load at '{}' phases {} not on node phases {}", l.node, l.phases, node.phases));
                }
                if l.s_pq.len() != l.phases.len() || l.y_const.len() != l.phases.len() {
                    push(DiagnosticKind::Dimension, format!("load at '{}' per-phase data does not match phases", l.node));
                }
            }
        }
    }
    for d in net.ders() {
        match net.node(&d.node) {
            None => push(DiagnosticKind::UnknownNode, format!("DER '{}' references unknown node '{}'", d.id, d.node)),
            Some(node) => {
                if !d.phases.is_subset_of(node.phases) {
                    push(DiagnosticKind::PhaseMismatch, format!("DER '{}' phases {} not on node phases {}", d.id, d.phases, node.phases));
                }
                if node.kind == NodeKind::Substation {
                    push(DiagnosticKind::DerLimits, format!("DER '{}' sits on the substation node", d.id));
                }
            }
        }
        if d.p_min > d.p_max || d.q_min > d.q_max || d.s_rated < 0.0 {
            push(DiagnosticKind::DerLimits, format!("DER '{}' has an empty P/Q box", d.id));
        } else {
            // closest point of the box to the origin must lie in the rating disk
            let p = 0.0f64.clamp(d.p_min, d.p_max);
            let q = 0.0f64.clamp(d.q_min, d.q_max);
            if p.hypot(q) > d.s_rated {
                push(DiagnosticKind::DerLimits, format!("DER '{}' P/Q box misses the apparent-power disk", d.id));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn base_for(ids: &[&str]) -> PerUnitSystem {
        let mut pu = PerUnitSystem::new(1e6);
        for id in ids {
            pu.insert(*id, NodeBase { v_ln: 7200.0, side: Side::Primary });
        }
        pu
    }

    fn z1() -> C64 {
        C64::new(0.01, 0.02)
    }

    #[test]
    fn two_node_feeder_is_clean() {
        let net = NetworkModel::new(
            vec![
                Node::new("sub", PhaseSet::ABC, NodeKind::Substation),
                Node::new("n1", PhaseSet::ABC, NodeKind::MediumVoltage),
            ],
            vec![Branch::new("sub", "n1", PhaseSet::ABC, CMatrix::identity(3, 3) * z1())],
            vec![],
            vec![],
            base_for(&["sub", "n1"]),
            UnitSystem::PerUnit,
        );
        assert!(validate_network(&net).is_empty(), "{:?}", validate_network(&net));
    }

    #[test]
    fn cycle_is_not_radial() {
        let a = PhaseSet::single(Phase::A);
        let net = NetworkModel::new(
            vec![
                Node::new("sub", PhaseSet::ABC, NodeKind::Substation),
                Node::new("n1", a, NodeKind::MediumVoltage),
                Node::new("n2", a, NodeKind::MediumVoltage),
            ],
            vec![
                Branch::single("sub", "n1", Phase::A, z1()),
                Branch::single("n1", "n2", Phase::A, z1()),
                Branch::single("sub", "n2", Phase::A, z1()),
            ],
            vec![],
            vec![],
            base_for(&["sub", "n1", "n2"]),
            UnitSystem::PerUnit,
        );
        let d = validate_network(&net);
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::NotRadial), "{d:?}");
    }

    #[test]
    fn detached_loop_is_reported() {
        let a = PhaseSet::single(Phase::A);
        let net = NetworkModel::new(
            vec![
                Node::new("sub", PhaseSet::ABC, NodeKind::Substation),
                Node::new("x", a, NodeKind::MediumVoltage),
                Node::new("y", a, NodeKind::MediumVoltage),
            ],
            vec![Branch::single("x", "y", Phase::A, z1()), Branch::single("y", "x", Phase::A, z1())],
            vec![],
            vec![],
            base_for(&["sub", "x", "y"]),
            UnitSystem::PerUnit,
        );
        let d = validate_network(&net);
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::NotRadial));
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::Disconnected));
    }

    #[test]
    fn phase_b_branch_between_ac_nodes() {
        let ac: PhaseSet = "ac".parse().unwrap();
        let net = NetworkModel::new(
            vec![Node::new("sub", ac, NodeKind::Substation), Node::new("n1", ac, NodeKind::MediumVoltage)],
            vec![Branch::single("sub", "n1", Phase::B, z1())],
            vec![],
            vec![],
            base_for(&["sub", "n1"]),
            UnitSystem::PerUnit,
        );
        let d = validate_network(&net);
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::PhaseMismatch));
        assert!(d.iter().any(|d| d.to_string().starts_with("phase mismatch")));
    }

    #[test]
    fn bad_limits_and_der_box() {
        let a = PhaseSet::single(Phase::A);
        let net = NetworkModel::new(
            vec![
                Node::new("sub", a, NodeKind::Substation),
                Node::new("n1", a, NodeKind::ServicePoint).with_limits(1.1, 1.0),
            ],
            vec![Branch::single("sub", "n1", Phase::A, z1())],
            vec![],
            vec![Der { p_min: 2.0, ..Der::inverter("pv", "n1", a, 3.0, 1.0) }],
            base_for(&["sub", "n1"]),
            UnitSystem::PerUnit,
        );
        let d = validate_network(&net);
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::VoltageLimits));
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::DerLimits));
    }
}
