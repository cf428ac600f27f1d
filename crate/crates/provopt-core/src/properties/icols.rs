use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::algebra::{NodeId, NodeRef, Operator, QueryGraph};

pub type AttrSet = BTreeSet<String>;

/// Attributes of input `idx` that `parent` needs, given what is needed
/// from `parent` itself.
pub fn icols_for_input(parent: &NodeRef, needed: &AttrSet, idx: usize) -> AttrSet {
    let child = parent.input(idx).schema();
    let full = || child.iter().cloned().collect::<AttrSet>();
    let within = |s: AttrSet| {
        s.into_iter()
            .filter(|a| child.contains(a))
            .collect::<AttrSet>()
    };
    match parent.op() {
        Operator::Relation { .. } => AttrSet::new(),
        Operator::Select(cond) => {
            let mut s = needed.clone();
            s.extend(cond.columns());
            within(s)
        }
        Operator::Project(items) => items
            .iter()
            .filter(|it| needed.contains(&it.name))
            .flat_map(|it| it.expr.columns())
            .collect(),
        Operator::Join(on) => {
            let mut s = needed.clone();
            for (a, b) in on {
                s.insert(a.clone());
                s.insert(b.clone());
            }
            within(s)
        }
        Operator::Cross => within(needed.clone()),
        Operator::Agg { group_by, aggs } => group_by
            .iter()
            .cloned()
            .chain(aggs.iter().map(|a| a.arg.clone()))
            .collect(),
        Operator::DupElim | Operator::Intersect | Operator::Diff => full(),
        Operator::Union => {
            if idx == 0 {
                within(needed.clone())
            } else {
                let pos: BTreeMap<&String, &String> =
                    parent.schema().iter().zip(child.iter()).collect();
                needed
                    .iter()
                    .filter_map(|a| pos.get(a).map(|s| (*s).clone()))
                    .collect()
            }
        }
        Operator::Window {
            call,
            partition_by,
            order_by,
            ..
        } => {
            let mut s: AttrSet = needed.iter().filter(|a| **a != call.out).cloned().collect();
            s.insert(call.arg.clone());
            s.extend(partition_by.iter().cloned());
            s.extend(order_by.iter().cloned());
            within(s)
        }
    }
}

/// Needed attributes per node: the full schema at the root, the union
/// over consumers elsewhere.
pub fn infer_icols(graph: &QueryGraph) -> BTreeMap<NodeId, AttrSet> {
    let mut acc: BTreeMap<NodeId, AttrSet> = BTreeMap::new();
    acc.insert(graph.root().id(), graph.schema().iter().cloned().collect());
    let order: Vec<NodeRef> = graph.topo_order();
    for n in order.iter().rev() {
        let needed = acc.get(&n.id()).cloned().unwrap_or_default();
        for (i, c) in n.inputs().iter().enumerate() {
            let part = icols_for_input(n, &needed, i);
            acc.entry(c.id()).or_default().extend(part);
        }
    }
    acc
}
