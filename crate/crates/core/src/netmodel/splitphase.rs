//! Center-tapped distribution transformers and triplex secondaries.
//!
//! Under symmetric windings/conductors and balanced 120-V loads no current
//! flows in the neutral, and the secondary reduces to a single-phase circuit
//! connected line-to-line. With the split-phase per-unit bases the ideal
//! transformer disappears and the whole service drop becomes a T-equivalent
//! chain: `Z0 → (core shunt) → Z1 → triplex segments`.

use std::collections::HashSet;

use super::{
    Branch, Load, LoadClass, NetworkError, NetworkModel, Node, NodeBase, NodeKind, PerUnitSystem,
    Phase, PhaseSet, Side, UnitSystem, C64, SYMMETRY_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPhaseTransformer {
    pub id: String,
    pub primary_node: String,
    /// Secondary terminal node (the 120/240-V bus at the transformer).
    pub secondary_node: String,
    pub phase: Phase,
    /// Primary winding impedance (Ω, primary side).
    pub z0: C64,
    /// Secondary half-winding impedances (Ω, secondary side).
    pub z1: C64,
    pub z2: C64,
    /// Core resistance and magnetizing reactance (Ω, primary side);
    /// `f64::INFINITY` marks an absent element.
    pub rc: f64,
    pub xm: f64,
    pub vbp_ln: f64,
    pub vbs_ln: f64,
    pub rating: f64,
}

impl SplitPhaseTransformer {
    pub fn turns_ratio(&self) -> f64 {
        self.vbp_ln / self.vbs_ln
    }

    /// Core admittance `1/Rc − j/Xm` (S), zero when both elements are absent.
    pub fn core_admittance(&self) -> C64 {
        C64::new(1.0 / self.rc, -1.0 / self.xm)
    }

    pub fn check(&self) -> Result<(), NetworkError> {
        let bad = |reason: &str| NetworkError::InvalidTransformer { id: self.id.clone(), reason: reason.to_string() };
        if !(self.rc > 0.0) || !(self.xm > 0.0) {
            return Err(bad("Rc and Xm must be positive"));
        }
        if !(self.vbp_ln > 0.0 && self.vbs_ln > 0.0) || !(self.turns_ratio() > 1.0) {
            return Err(bad("turns ratio Vbp/Vbs must exceed 1"));
        }
        if self.z0.re < 0.0 || self.z1.re < 0.0 || self.z2.re < 0.0 {
            return Err(bad("winding resistance must be nonnegative"));
        }
        if !symmetric(self.z1, self.z2) {
            return Err(NetworkError::AsymmetricSecondary(format!(
                "transformer '{}' has Z1 = {} but Z2 = {}",
                self.id, self.z1, self.z2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriplexLine {
    pub from: String,
    pub to: String,
    /// Total series impedance of each hot conductor (Ω).
    pub z1: C64,
    pub z2: C64,
    pub length: f64,
}

impl TriplexLine {
    pub fn check(&self) -> Result<(), NetworkError> {
        if !symmetric(self.z1, self.z2) {
            return Err(NetworkError::AsymmetricSecondary(format!(
                "triplex {} -> {} has Z1 = {} but Z2 = {}",
                self.from, self.to, self.z1, self.z2
            )));
        }
        if self.z1.re < 0.0 {
            return Err(NetworkError::InvalidElement(format!("triplex {} -> {} has negative resistance", self.from, self.to)));
        }
        Ok(())
    }
}

fn symmetric(a: C64, b: C64) -> bool {
    (a - b).norm() <= SYMMETRY_TOLERANCE * a.norm().max(b.norm())
}

/// `Z_c = j Rc Xm / (Rc + j Xm)`, the parallel combination of the core
/// resistance and the magnetizing reactance. Infinite inputs are open circuits.
pub fn core_shunt_impedance(rc: f64, xm: f64) -> Result<C64, NetworkError> {
    if !(rc > 0.0) || !(xm > 0.0) {
        return Err(NetworkError::InvalidElement(format!("core elements must be positive, got Rc={rc}, Xm={xm}")));
    }
    match (rc.is_infinite(), xm.is_infinite()) {
        (true, true) => Err(NetworkError::NoCoreModel),
        (true, false) => Ok(C64::new(0.0, xm)),
        (false, true) => Ok(C64::new(rc, 0.0)),
        (false, false) => Ok(C64::new(0.0, rc * xm) / C64::new(rc, xm)),
    }
}

/// Single-phase elements replacing one transformer and its triplex drops.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPhaseExpansion {
    /// Core node, secondary terminal node, then service points.
    pub nodes: Vec<Node>,
    pub branches: Vec<Branch>,
    /// Constant-impedance load at the core node (absent when Rc = Xm = ∞).
    pub core_load: Option<Load>,
}

pub(crate) fn core_node_id(xfmr_id: &str) -> String {
    format!("{xfmr_id}:core")
}

/// Expansion in SI, each branch impedance referred to its `to` node's side.
pub(crate) fn expand_si(
    xfmr: &SplitPhaseTransformer,
    triplex: &[TriplexLine],
) -> Result<(SplitPhaseExpansion, Vec<(String, NodeBase)>), NetworkError> {
    xfmr.check()?;
    for t in triplex {
        t.check()?;
    }
    let phase = PhaseSet::single(xfmr.phase);
    let core = core_node_id(&xfmr.id);
    let primary_base = NodeBase { v_ln: xfmr.vbp_ln, side: Side::Primary };
    let secondary_base = NodeBase { v_ln: xfmr.vbs_ln, side: Side::Secondary };

    let mut nodes = vec![
        Node::new(core.clone(), phase, NodeKind::TransformerCore).with_limits(0.5, 1.5),
        Node::new(xfmr.secondary_node.clone(), phase, NodeKind::Secondary),
    ];
    let mut bases = vec![(core.clone(), primary_base), (xfmr.secondary_node.clone(), secondary_base)];
    let mut branches = vec![
        Branch::single(xfmr.primary_node.clone(), core.clone(), xfmr.phase, xfmr.z0),
        Branch::single(core.clone(), xfmr.secondary_node.clone(), xfmr.phase, xfmr.z1),
    ];

    // attach triplex segments in topological order from the terminal node
    let mut known: HashSet<&str> = HashSet::from([xfmr.secondary_node.as_str()]);
    let mut placed = vec![false; triplex.len()];
    loop {
        let mut progress = false;
        for (k, t) in triplex.iter().enumerate() {
            if placed[k] || !known.contains(t.from.as_str()) {
                continue;
            }
            if !known.insert(t.to.as_str()) {
                return Err(NetworkError::InvalidElement(format!("triplex node '{}' is fed twice", t.to)));
            }
            placed[k] = true;
            progress = true;
            nodes.push(Node::new(t.to.clone(), phase, NodeKind::ServicePoint));
            bases.push((t.to.clone(), secondary_base));
            branches.push(Branch::single(t.from.clone(), t.to.clone(), xfmr.phase, t.z1));
        }
        if !progress {
            break;
        }
    }
    if let Some(k) = placed.iter().position(|p| !p) {
        return Err(NetworkError::InvalidElement(format!(
            "triplex {} -> {} is not connected to transformer '{}'",
            triplex[k].from, triplex[k].to, xfmr.id
        )));
    }

    let y = xfmr.core_admittance();
    let core_load = (y.norm() > 0.0).then(|| Load::constant_impedance(core, phase, vec![y], LoadClass::TransformerCore));
    Ok((SplitPhaseExpansion { nodes, branches, core_load }, bases))
}

/// Expands a split-phase transformer and its triplex secondaries into
/// per-unit single-phase branch-flow elements.
///
/// `pu` supplies `S_b`; if it already holds a base for the primary node it
/// must agree with the transformer's primary base voltage.
pub fn expand_split_phase(
    xfmr: &SplitPhaseTransformer,
    triplex: &[TriplexLine],
    pu: &PerUnitSystem,
) -> Result<SplitPhaseExpansion, NetworkError> {
    if let Some(b) = pu.base(&xfmr.primary_node) {
        if (b.v_ln - xfmr.vbp_ln).abs() > 1e-9 * b.v_ln {
            return Err(NetworkError::InvalidTransformer {
                id: xfmr.id.clone(),
                reason: format!("primary base {} V differs from node base {} V", xfmr.vbp_ln, b.v_ln),
            });
        }
    }
    let (si, bases) = expand_si(xfmr, triplex)?;
    let mut system = PerUnitSystem::new(pu.s_base());
    for (id, b) in bases {
        system.insert(id, b);
    }
    let loads = si.core_load.into_iter().collect();
    let net = NetworkModel::new(si.nodes, si.branches, loads, vec![], system, UnitSystem::Si).to_per_unit()?;
    Ok(SplitPhaseExpansion {
        nodes: net.nodes().to_vec(),
        branches: net.branches().to_vec(),
        core_load: net.loads().first().cloned(),
    })
}
