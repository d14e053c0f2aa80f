use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Which side of a split-phase transformer a node's base quantities refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Primary,
    Secondary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeBase {
    /// Base line-to-neutral voltage (V).
    pub v_ln: f64,
    pub side: Side,
}

/// Per-unit bases of a feeder.
///
/// Primary side: `Z_b = 3 V² / S_b`, `I_b = S_b / (3 V)`.
/// Secondary side (the 120/240-V circuit modeled line-to-line):
/// `Z_b = 2 · 3 V² / S_b`, `I_b = S_b / (2 · 3 V)`.
/// Both sides share the single-phase power base `S_b / 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerUnitSystem {
    s_base: f64,
    bases: BTreeMap<String, NodeBase>,
}

impl PerUnitSystem {
    pub fn new(s_base: f64) -> PerUnitSystem {
        PerUnitSystem { s_base, bases: BTreeMap::new() }
    }

    /// Three-phase base apparent power (VA).
    pub fn s_base(&self) -> f64 {
        self.s_base
    }

    /// Base for one phase's complex power (VA).
    pub fn power_base(&self) -> f64 {
        self.s_base / 3.0
    }

    pub fn insert(&mut self, node: impl Into<String>, base: NodeBase) {
        self.bases.insert(node.into(), base);
    }

    pub fn base(&self, node: &str) -> Option<NodeBase> {
        self.bases.get(node).copied()
    }

    pub fn z_base(&self, node: &str) -> Option<f64> {
        self.base(node).map(|b| impedance_base(b, self.s_base))
    }

    pub fn i_base(&self, node: &str) -> Option<f64> {
        self.base(node).map(|b| current_base(b, self.s_base))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &NodeBase)> {
        self.bases.iter().map(|(k, v)| (k.as_str(), v))
    }
}

pub fn impedance_base(base: NodeBase, s_base: f64) -> f64 {
    let primary = 3.0 * base.v_ln * base.v_ln / s_base;
    match base.side {
        Side::Primary => primary,
        Side::Secondary => 2.0 * primary,
    }
}

pub fn current_base(base: NodeBase, s_base: f64) -> f64 {
    let primary = s_base / (3.0 * base.v_ln);
    match base.side {
        Side::Primary => primary,
        Side::Secondary => 0.5 * primary,
    }
}
