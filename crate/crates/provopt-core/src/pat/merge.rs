use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{factor_expr, fan_out, try_substitute, PatConfig};
use crate::algebra::{Expr, Node, NodeFlags, NodeRef, Operator, ProjItem, QueryGraph};

fn project_items(n: &NodeRef) -> Option<&Vec<ProjItem>> {
    match n.op() {
        Operator::Project(items) => Some(items),
        _ => None,
    }
}

pub(super) fn factor_step(g: &QueryGraph) -> Option<QueryGraph> {
    for n in g.topo_order() {
        let Some(items) = project_items(&n) else {
            continue;
        };
        let factored: Vec<ProjItem> = items
            .iter()
            .map(|it| ProjItem::new(factor_expr(&it.expr), it.name.clone()))
            .collect();
        if factored != *items {
            let repl =
                Node::with_flags(Operator::Project(factored), n.inputs().to_vec(), n.flags())
                    .ok()?;
            if let Some(next) = try_substitute(g, n.id(), repl) {
                return Some(next);
            }
        }
    }
    None
}

fn merged_items(outer: &[ProjItem], inner: &[ProjItem]) -> Vec<ProjItem> {
    let map: BTreeMap<String, Expr> = inner
        .iter()
        .map(|it| (it.name.clone(), it.expr.clone()))
        .collect();
    outer
        .iter()
        .map(|it| ProjItem::new(it.expr.substitute(&map), it.name.clone()))
        .collect()
}

fn size(items: &[ProjItem]) -> usize {
    items.iter().map(|it| it.expr.size()).sum()
}

/// Whether merging keeps expression growth linear.
fn merge_is_safe(
    outer: &[ProjItem],
    inner: &[ProjItem],
    merged: &[ProjItem],
    config: &PatConfig,
) -> bool {
    for it in inner.iter().filter(|it| it.expr.size() > 1) {
        let refs: usize = outer.iter().map(|o| o.expr.count_refs(&it.name)).sum();
        if refs > config.merge_max_refs {
            return false;
        }
    }
    let bound = (config.merge_size_factor * (size(outer) + size(inner))).max(config.merge_size_cap);
    size(merged) <= bound
}

pub(super) fn merge_projections_step(g: &QueryGraph, config: &PatConfig) -> Option<QueryGraph> {
    let fan = fan_out(g);
    for outer in g.topo_order() {
        let Some(out_items) = project_items(&outer) else {
            continue;
        };
        let inner = outer.input(0);
        let Some(in_items) = project_items(inner) else {
            continue;
        };
        if fan[&inner.id()] > 1 || inner.flags().materialize {
            continue;
        }
        let merged = merged_items(out_items, in_items);
        let (target, repl) = if merge_is_safe(out_items, in_items, &merged, config) {
            let r = Node::with_flags(
                Operator::Project(merged),
                inner.inputs().to_vec(),
                outer.flags(),
            )
            .ok()?;
            (outer.id(), r)
        } else {
            let flags = NodeFlags {
                materialize: true,
                ..inner.flags()
            };
            (inner.id(), Node::with_new_flags(inner, flags))
        };
        if let Some(next) = try_substitute(g, target, repl) {
            return Some(next);
        }
    }
    None
}

/// Merge every pair of adjacent projections with no size check, ignoring
/// sharing and materialization flags.
pub fn merge_projections_unguarded(g: &QueryGraph) -> QueryGraph {
    let mut g = g.clone();
    loop {
        let hit = g.topo_order().into_iter().find_map(|outer| {
            let out_items = project_items(&outer)?;
            let in_items = project_items(outer.input(0))?;
            let merged = merged_items(out_items, in_items);
            let repl = Node::with_flags(
                Operator::Project(merged),
                outer.input(0).inputs().to_vec(),
                NodeFlags::default(),
            )
            .ok()?;
            g.substitute(outer.id(), repl).ok()
        });
        match hit {
            Some(next) => g = next,
            None => return g,
        }
    }
}

pub(super) fn merge_selections_step(g: &QueryGraph) -> Option<QueryGraph> {
    let fan = fan_out(g);
    for outer in g.topo_order() {
        let Operator::Select(outer_cond) = outer.op() else {
            continue;
        };
        let inner = outer.input(0);
        let Operator::Select(inner_cond) = inner.op() else {
            continue;
        };
        if fan[&inner.id()] > 1 || inner.flags().materialize {
            continue;
        }
        let mut parts = inner_cond.conjuncts();
        for c in outer_cond.conjuncts() {
            if !parts.contains(&c) {
                parts.push(c);
            }
        }
        let repl = Node::with_flags(
            Operator::Select(Expr::conjunction(parts)),
            inner.inputs().to_vec(),
            outer.flags(),
        )
        .ok()?;
        if let Some(next) = try_substitute(g, outer.id(), repl) {
            return Some(next);
        }
    }
    None
}

pub(super) fn remove_redundant_step(g: &QueryGraph) -> Option<QueryGraph> {
    for n in g.topo_order() {
        let Some(items) = project_items(&n) else {
            continue;
        };
        if n.flags().materialize {
            continue;
        }
        let child = n.input(0);
        let identity = items.len() == child.schema().len()
            && items
                .iter()
                .zip(child.schema().iter())
                .all(|(it, a)| it.is_passthrough() && it.name == *a);
        if identity {
            if let Some(next) = try_substitute(g, n.id(), child.clone()) {
                return Some(next);
            }
        }
    }
    None
}
