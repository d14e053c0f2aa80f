//! Feeder data model: nodes, phased branches, loads and DER, the per-unit
//! system, and the expansion of split-phase secondaries into single-phase
//! branch-flow elements.

mod feeder;
mod perunit;
mod phase;
mod splitphase;
mod validate;

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use feeder::{
    BaseSpec, BranchSpec, DerSpec, FeederDescription, LoadSpec, NodeSpec, TransformerSpec,
    TriplexSpec,
};
pub use perunit::{current_base, impedance_base, NodeBase, PerUnitSystem, Side};
pub use phase::{Phase, PhaseSet};
pub use splitphase::{
    core_shunt_impedance, expand_split_phase, SplitPhaseExpansion, SplitPhaseTransformer,
    TriplexLine,
};
pub use validate::{validate_network, Diagnostic, DiagnosticKind};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance for the symmetric-winding and symmetric-conductor checks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid phases: {0}")]
    InvalidPhases(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("node '{0}' has no base voltage")]
    MissingBase(String),
    #[error("no core model: both Rc and Xm are infinite")]
    NoCoreModel,
    #[error("asymmetric secondary violates model assumption: {0}")]
    AsymmetricSecondary(String),
    #[error("invalid split-phase transformer '{id}': {reason}")]
    InvalidTransformer { id: String, reason: String },
    #[error("network is already in {0:?} units")]
    WrongUnits(UnitSystem),
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("network is not a valid radial feeder: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Substation,
    MediumVoltage,
    Secondary,
    ServicePoint,
    /// Artificial node between the primary winding impedance and the
    /// secondary winding impedance of an expanded split-phase transformer,
    /// where the core shunt attaches.
    TransformerCore,
}

impl NodeKind {
    /// Whether the node corresponds to a physical point whose voltage is
    /// monitored against service limits.
    pub fn is_physical(self) -> bool {
        !matches!(self, NodeKind::TransformerCore)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub phases: PhaseSet,
    pub kind: NodeKind,
    /// Per-phase voltage magnitude limits (pu), aligned with `phases`.
    pub vmin: Vec<f64>,
    pub vmax: Vec<f64>,
    /// Per-phase constant shunt admittance (pu in a per-unit model, S in SI).
    pub shunt: Vec<C64>,
}

impl Node {
    pub fn new(id: impl Into<String>, phases: PhaseSet, kind: NodeKind) -> Node {
        let n = phases.len();
        Node {
            id: id.into(),
            phases,
            kind,
            vmin: vec![0.95; n],
            vmax: vec![1.05; n],
            shunt: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn with_limits(mut self, vmin: f64, vmax: f64) -> Node {
        self.vmin = vec![vmin; self.phases.len()];
        self.vmax = vec![vmax; self.phases.len()];
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: String,
    pub to: String,
    pub phases: PhaseSet,
    /// Phase impedance matrix, |Φ|×|Φ|, referred to the `to` node's side.
    pub z: CMatrix,
    /// Per-phase current magnitude limit; `f64::INFINITY` when unlimited.
    pub ampacity: Vec<f64>,
}

impl Branch {
    pub fn new(from: impl Into<String>, to: impl Into<String>, phases: PhaseSet, z: CMatrix) -> Branch {
        let n = phases.len();
        Branch { from: from.into(), to: to.into(), phases, z, ampacity: vec![f64::INFINITY; n] }
    }

    /// Single-phase branch with scalar impedance.
    pub fn single(from: impl Into<String>, to: impl Into<String>, phase: Phase, z: C64) -> Branch {
        Branch::new(from, to, PhaseSet::single(phase), CMatrix::from_element(1, 1, z))
    }

    pub fn is_zero_impedance(&self) -> bool {
        self.z.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadClass {
    Customer,
    /// Constant-impedance no-load loss of a distribution transformer core.
    TransformerCore,
}

/// Load at one node: `s = s_pq + diag(V) conj(y_const)` per phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub node: String,
    pub phases: PhaseSet,
    pub s_pq: Vec<C64>,
    pub y_const: Vec<C64>,
    pub class: LoadClass,
}

impl Load {
    pub fn constant_power(node: impl Into<String>, phases: PhaseSet, s: Vec<C64>) -> Load {
        let n = phases.len();
        Load { node: node.into(), phases, s_pq: s, y_const: vec![C64::new(0.0, 0.0); n], class: LoadClass::Customer }
    }

    pub fn constant_impedance(node: impl Into<String>, phases: PhaseSet, y: Vec<C64>, class: LoadClass) -> Load {
        let n = phases.len();
        Load { node: node.into(), phases, s_pq: vec![C64::new(0.0, 0.0); n], y_const: y, class }
    }
}

/// Inverter-interfaced DER. Limits apply to each of its phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Der {
    pub id: String,
    pub node: String,
    pub phases: PhaseSet,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub s_rated: f64,
}

impl Der {
    /// DER with the customary reactive capability of ±44 % of its rating.
    pub fn inverter(id: impl Into<String>, node: impl Into<String>, phases: PhaseSet, p_max: f64, s_rated: f64) -> Der {
        Der {
            id: id.into(),
            node: node.into(),
            phases,
            p_min: 0.0,
            p_max,
            q_min: -0.44 * s_rated,
            q_max: 0.44 * s_rated,
            s_rated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitSystem {
    Si,
    PerUnit,
}

/// One node-phase of the network in canonical (node order, a < b < c) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bus {
    pub node: usize,
    pub phase: Phase,
}

/// Radial multi-phase feeder. Immutable once built.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    nodes: Vec<Node>,
    branches: Vec<Branch>,
    loads: Vec<Load>,
    ders: Vec<Der>,
    base: PerUnitSystem,
    units: UnitSystem,
    index: HashMap<String, usize>,
    buses: Vec<Bus>,
    bus_start: Vec<usize>,
}

impl NetworkModel {
    pub fn new(
        nodes: Vec<Node>,
        branches: Vec<Branch>,
        loads: Vec<Load>,
        ders: Vec<Der>,
        base: PerUnitSystem,
        units: UnitSystem,
    ) -> NetworkModel {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id.clone()).or_insert(i);
        }
        let mut buses = Vec::new();
        let mut bus_start = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            bus_start.push(buses.len());
            buses.extend(n.phases.iter().map(|phase| Bus { node: i, phase }));
        }
        NetworkModel { nodes, branches, loads, ders, base, units, index, buses, bus_start }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn ders(&self) -> &[Der] {
        &self.ders
    }

    pub fn base(&self) -> &PerUnitSystem {
        &self.base
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    /// All node-phases in canonical order.
    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn bus_index(&self, node: usize, phase: Phase) -> Option<usize> {
        let n = self.nodes.get(node)?;
        n.phases.position(phase).map(|p| self.bus_start[node] + p)
    }

    pub fn bus_of(&self, node_id: &str, phase: Phase) -> Option<usize> {
        self.bus_index(self.node_index(node_id)?, phase)
    }

    pub fn bus_label(&self, bus: usize) -> String {
        let b = self.buses[bus];
        format!("{}.{}", self.nodes[b.node].id, b.phase)
    }

    pub fn substation(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.kind == NodeKind::Substation)
    }

    /// Per-bus constant-power injection implied by the network's loads
    /// (negative of consumption; DER excluded).
    pub fn load_injection(&self) -> Vec<C64> {
        let mut s = vec![C64::new(0.0, 0.0); self.buses.len()];
        for load in &self.loads {
            for (k, phase) in load.phases.iter().enumerate() {
                if let Some(b) = self.bus_of(&load.node, phase) {
                    s[b] -= load.s_pq[k];
                }
            }
        }
        s
    }

    /// Per-bus constant admittance: constant-impedance loads plus node shunts.
    pub fn constant_admittance(&self) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.buses.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            for (k, _) in node.phases.iter().enumerate() {
                y[self.bus_start[i] + k] += node.shunt[k];
            }
        }
        for load in &self.loads {
            for (k, phase) in load.phases.iter().enumerate() {
                if let Some(b) = self.bus_of(&load.node, phase) {
                    y[b] += load.y_const[k];
                }
            }
        }
        y
    }

    /// Copy of the network with every load of `class` removed.
    pub fn without_load_class(&self, class: LoadClass) -> NetworkModel {
        let loads = self.loads.iter().filter(|l| l.class != class).cloned().collect();
        NetworkModel::new(
            self.nodes.clone(),
            self.branches.clone(),
            loads,
            self.ders.clone(),
            self.base.clone(),
            self.units,
        )
    }

    /// Copy with uniform voltage limits on every physical node.
    pub fn with_voltage_limits(&self, vmin: f64, vmax: f64) -> NetworkModel {
        let nodes = self
            .nodes
            .iter()
            .map(|n| if n.kind.is_physical() { n.clone().with_limits(vmin, vmax) } else { n.clone() })
            .collect();
        NetworkModel::new(nodes, self.branches.clone(), self.loads.clone(), self.ders.clone(), self.base.clone(), self.units)
    }

    /// Copy with additional loads appended.
    pub fn with_extra_loads(&self, extra: impl IntoIterator<Item = Load>) -> NetworkModel {
        let mut loads = self.loads.clone();
        loads.extend(extra);
        NetworkModel::new(self.nodes.clone(), self.branches.clone(), loads, self.ders.clone(), self.base.clone(), self.units)
    }

    /// Converts an SI model (impedances in Ω referred to each branch's `to`
    /// side, powers in W/var per phase, admittances in S) to per unit.
    pub fn to_per_unit(&self) -> Result<NetworkModel, NetworkError> {
        if self.units != UnitSystem::Si {
            return Err(NetworkError::WrongUnits(self.units));
        }
        self.rescale(Direction::ToPerUnit)
    }

    pub fn from_per_unit(&self) -> Result<NetworkModel, NetworkError> {
        if self.units != UnitSystem::PerUnit {
            return Err(NetworkError::WrongUnits(self.units));
        }
        self.rescale(Direction::ToSi)
    }

    fn rescale(&self, dir: Direction) -> Result<NetworkModel, NetworkError> {
        let pu = &self.base;
        let zb = |id: &str| pu.z_base(id).ok_or_else(|| NetworkError::MissingBase(id.to_string()));
        let ib = |id: &str| pu.i_base(id).ok_or_else(|| NetworkError::MissingBase(id.to_string()));
        // factor f so that pu = si / f
        let apply = |x: f64, f: f64| match dir {
            Direction::ToPerUnit => x / f,
            Direction::ToSi => x * f,
        };
        let sb = pu.power_base();

        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let z = zb(&n.id)?;
            let mut n2 = n.clone();
            // admittance: pu = si * Z_b
            n2.shunt = n.shunt.iter().map(|y| *y * apply(1.0, 1.0 / z)).collect();
            nodes.push(n2);
        }
        let mut branches = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let z = zb(&b.to)?;
            let i = ib(&b.to)?;
            let mut b2 = b.clone();
            b2.z = b.z.map(|v| v * apply(1.0, z));
            b2.ampacity = b.ampacity.iter().map(|a| apply(*a, i)).collect();
            branches.push(b2);
        }
        let mut loads = Vec::with_capacity(self.loads.len());
        for l in &self.loads {
            let z = zb(&l.node)?;
            let mut l2 = l.clone();
            l2.s_pq = l.s_pq.iter().map(|s| *s * apply(1.0, sb)).collect();
            l2.y_const = l.y_const.iter().map(|y| *y * apply(1.0, 1.0 / z)).collect();
            loads.push(l2);
        }
        let ders = self
            .ders
            .iter()
            .map(|d| Der {
                p_min: apply(d.p_min, sb),
                p_max: apply(d.p_max, sb),
                q_min: apply(d.q_min, sb),
                q_max: apply(d.q_max, sb),
                s_rated: apply(d.s_rated, sb),
                ..d.clone()
            })
            .collect();
        let units = match dir {
            Direction::ToPerUnit => UnitSystem::PerUnit,
            Direction::ToSi => UnitSystem::Si,
        };
        Ok(NetworkModel::new(nodes, branches, loads, ders, self.base.clone(), units))
    }
}

#[derive(Clone, Copy)]
enum Direction {
    ToPerUnit,
    ToSi,
}

/// Parent/child structure of a validated radial network.
#[derive(Debug, Clone)]
pub struct Topology {
    pub root: usize,
    /// Incoming branch of each node (`None` for the root).
    pub parent_branch: Vec<Option<usize>>,
    /// Outgoing branches of each node.
    pub children: Vec<Vec<usize>>,
    pub from_node: Vec<usize>,
    pub to_node: Vec<usize>,
    /// Nodes in root-to-leaf order.
    pub order: Vec<usize>,
}

impl Topology {
    pub fn new(net: &NetworkModel) -> Result<Topology, NetworkError> {
        let diags = validate_network(net);
        if let Some(d) = diags.iter().find(|d| d.kind.is_structural()) {
            return Err(NetworkError::Invalid(d.to_string()));
        }
        let n = net.nodes().len();
        let root = net.substation().ok_or_else(|| NetworkError::Invalid("no substation".into()))?;
        let mut parent_branch = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut from_node = Vec::with_capacity(net.branches().len());
        let mut to_node = Vec::with_capacity(net.branches().len());
        for (k, b) in net.branches().iter().enumerate() {
            let f = net.node_index(&b.from).ok_or_else(|| NetworkError::UnknownNode(b.from.clone()))?;
            let t = net.node_index(&b.to).ok_or_else(|| NetworkError::UnknownNode(b.to.clone()))?;
            parent_branch[t] = Some(k);
            children[f].push(k);
            from_node.push(f);
            to_node.push(t);
        }
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            order.push(i);
            for &k in children[i].iter().rev() {
                stack.push(to_node[k]);
            }
        }
        Ok(Topology { root, parent_branch, children, from_node, to_node, order })
    }
}
