use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::algebra::{NodeId, NodeRef, Operator, QueryGraph, Schema};

pub type Key = BTreeSet<String>;

/// Declared keys of base relations, by relation name.
pub type BaseKeys = BTreeMap<String, Vec<Key>>;

/// Drop keys that contain another key; sorted and deduplicated.
pub fn minimize(keys: Vec<Key>) -> Vec<Key> {
    let mut keys: Vec<Key> = keys
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    keys.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut out: Vec<Key> = Vec::new();
    for k in keys {
        if !out.iter().any(|m| m.is_subset(&k)) {
            out.push(k);
        }
    }
    out.sort();
    out
}

fn positional(from: &Schema, to: &Schema) -> BTreeMap<String, String> {
    from.iter().cloned().zip(to.iter().cloned()).collect()
}

pub fn keys_bottom_up(node: &NodeRef, inputs: &[&Vec<Key>], base: &BaseKeys) -> Vec<Key> {
    let schema = node.schema();
    let keys = match node.op() {
        Operator::Relation { name, .. } => base
            .get(name)
            .map(|ks| {
                ks.iter()
                    .filter(|k| !k.is_empty() && k.iter().all(|a| schema.contains(a)))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default(),
        Operator::Select(_) | Operator::Diff | Operator::Window { .. } => inputs[0].clone(),
        Operator::Project(items) => {
            let mut out = Vec::new();
            for k in inputs[0].iter() {
                let image: Option<Key> = k
                    .iter()
                    .map(|a| {
                        items
                            .iter()
                            .find(|it| it.expr.as_attr() == Some(a.as_str()))
                            .map(|it| it.name.clone())
                    })
                    .collect();
                if let Some(img) = image {
                    out.push(img);
                }
            }
            out
        }
        Operator::Join(on) => {
            let mut out = Vec::new();
            for e1 in inputs[0].iter() {
                for e2 in inputs[1].iter() {
                    for (a, b) in on {
                        let mut k1: Key = e1.clone();
                        k1.insert(a.clone());
                        k1.extend(e2.iter().filter(|x| *x != b).cloned());
                        out.push(k1);
                        let mut k2: Key = e2.clone();
                        k2.insert(b.clone());
                        k2.extend(e1.iter().filter(|x| *x != a).cloned());
                        out.push(k2);
                    }
                }
            }
            out
        }
        Operator::Cross => {
            let mut out = Vec::new();
            for e1 in inputs[0].iter() {
                for e2 in inputs[1].iter() {
                    out.push(e1.union(e2).cloned().collect());
                }
            }
            out
        }
        Operator::Agg { group_by, aggs } => {
            if group_by.is_empty() {
                aggs.iter()
                    .map(|a| [a.out.clone()].into_iter().collect())
                    .collect()
            } else {
                let g: Key = group_by.iter().cloned().collect();
                let mut out: Vec<Key> = inputs[0]
                    .iter()
                    .filter(|k| k.is_subset(&g))
                    .cloned()
                    .collect();
                out.push(g);
                out
            }
        }
        Operator::DupElim => {
            if inputs[0].is_empty() {
                let mut v = Vec::new();
                v.push(schema.iter().cloned().collect());
                v
            } else {
                inputs[0].clone()
            }
        }
        Operator::Union => Vec::new(),
        Operator::Intersect => {
            let map = positional(node.input(1).schema(), node.input(0).schema());
            let mut out = inputs[0].clone();
            out.extend(
                inputs[1]
                    .iter()
                    .map(|k| k.iter().map(|a| map[a].clone()).collect()),
            );
            out
        }
    };
    minimize(keys)
}

pub fn infer_keys(graph: &QueryGraph, base: &BaseKeys) -> BTreeMap<NodeId, Vec<Key>> {
    let mut memo: BTreeMap<NodeId, Vec<Key>> = BTreeMap::new();
    for n in graph.topo_order() {
        let inputs: Vec<&Vec<Key>> = n.inputs().iter().map(|c| &memo[&c.id()]).collect();
        let k = keys_bottom_up(&n, &inputs, base);
        memo.insert(n.id(), k);
    }
    memo
}
