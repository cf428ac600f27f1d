//! Inferred plan properties: candidate keys, equivalence classes, needed
//! attributes and duplicate insensitivity.
//!
//! Keys and bottom-up classes flow from the leaves up; needed attributes,
//! the duplicate-insensitivity flag and the second class pass flow from the
//! root down. On a DAG, top-down values combine over all consumers.

mod cnf;
mod ec;
mod icols;
mod keys;
mod set;

use alloc::collections::BTreeMap;

use crate::algebra::{NodeId, QueryGraph};

pub use cnf::{to_cnf, DEFAULT_CLAUSE_CAP};
pub use ec::{ec_bottom_up, equality_pairs, infer_ec, EcClass, EcItem, EcResult, EquivClasses};
pub use icols::{icols_for_input, infer_icols, AttrSet};
pub use keys::{infer_keys, keys_bottom_up, minimize, BaseKeys, Key};
pub use set::{infer_set, set_for_input};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PropertyError {
    #[error("condition has no conjunctive normal form within the clause bound")]
    NotCnf,
}

/// All properties of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeProperties {
    pub keys: alloc::vec::Vec<Key>,
    pub ec: EquivClasses,
    pub ec_bottom_up: EquivClasses,
    pub icols: AttrSet,
    pub set: bool,
}

/// Properties of every node of one graph version.
#[derive(Debug, Clone, Default)]
pub struct PropertyStore {
    nodes: BTreeMap<NodeId, NodeProperties>,
}

impl PropertyStore {
    pub fn get(&self, id: NodeId) -> Option<&NodeProperties> {
        self.nodes.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &NodeProperties)> {
        self.nodes.iter()
    }
}

impl core::ops::Index<NodeId> for PropertyStore {
    type Output = NodeProperties;

    fn index(&self, id: NodeId) -> &NodeProperties {
        &self.nodes[&id]
    }
}

pub fn infer_all(graph: &QueryGraph, base: &BaseKeys) -> PropertyStore {
    let mut keys = infer_keys(graph, base);
    let EcResult {
        mut bottom_up,
        mut full,
    } = infer_ec(graph);
    let mut icols = infer_icols(graph);
    let set = infer_set(graph);
    let nodes = graph
        .topo_order()
        .into_iter()
        .map(|n| {
            let id = n.id();
            let p = NodeProperties {
                keys: keys.remove(&id).unwrap_or_default(),
                ec: full.remove(&id).unwrap_or_default(),
                ec_bottom_up: bottom_up.remove(&id).unwrap_or_default(),
                icols: icols.remove(&id).unwrap_or_default(),
                set: set[&id],
            };
            (id, p)
        })
        .collect();
    PropertyStore { nodes }
}
