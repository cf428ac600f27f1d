use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::{fan_out, try_substitute, Ctx, PatError};
use crate::algebra::{attr, Node, NodeFlags, NodeRef, Operator, ProjItem, QueryGraph};
use crate::properties::{infer_icols, infer_keys, infer_set, BaseKeys};

/// Columns an operator reads from its inputs by name.
fn referenced(n: &NodeRef) -> BTreeSet<String> {
    match n.op() {
        Operator::Select(c) => c.columns(),
        Operator::Join(on) => on
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect(),
        Operator::Window {
            call,
            partition_by,
            order_by,
            ..
        } => {
            let mut s: BTreeSet<String> = partition_by.iter().chain(order_by).cloned().collect();
            s.insert(call.arg.clone());
            s
        }
        _ => BTreeSet::new(),
    }
}

/// Items `a -> b` copying an attribute the projection also passes through.
fn duplicate_items(items: &[ProjItem]) -> Vec<(String, String)> {
    let passed: BTreeSet<&str> = items
        .iter()
        .filter(|it| it.is_passthrough())
        .map(|it| it.name.as_str())
        .collect();
    items
        .iter()
        .filter_map(|it| {
            let a = it.expr.as_attr()?;
            (a != it.name && passed.contains(a)).then(|| (String::from(a), it.name.clone()))
        })
        .collect()
}

/// `◇(Π_{A, a→b}(R))` becomes `Π_{.., a→b, ..}(◇(Π_A(R)))` when `◇` does not
/// read `b`.
pub(super) fn pull_up_step(g: &QueryGraph) -> Option<QueryGraph> {
    let fan = fan_out(g);
    for d in g.topo_order() {
        if !matches!(
            d.op(),
            Operator::Select(_)
                | Operator::Join(_)
                | Operator::Cross
                | Operator::DupElim
                | Operator::Window { .. }
        ) {
            continue;
        }
        for (i, c) in d.inputs().iter().enumerate() {
            let Operator::Project(items) = c.op() else {
                continue;
            };
            if fan[&c.id()] > 1 || c.flags().materialize {
                continue;
            }
            let dups = duplicate_items(items);
            let reads = referenced(&d);
            if dups.is_empty() || dups.iter().any(|(_, b)| reads.contains(b)) {
                continue;
            }
            let kept: Vec<ProjItem> = items
                .iter()
                .filter(|it| !dups.iter().any(|(_, b)| *b == it.name))
                .cloned()
                .collect();
            let Ok(slim) =
                Node::with_flags(Operator::Project(kept), c.inputs().to_vec(), c.flags())
            else {
                continue;
            };
            let mut inputs = d.inputs().to_vec();
            inputs[i] = slim;
            let Ok(inner) = Node::rebuild(&d, inputs) else {
                continue;
            };
            let wrap = d
                .schema()
                .iter()
                .map(|n| match dups.iter().find(|(_, b)| b == n) {
                    Some((a, b)) => ProjItem::new(attr(a.clone()), b.clone()),
                    None => ProjItem::keep(n.clone()),
                })
                .collect();
            let Ok(repl) = Node::project(wrap, inner) else {
                continue;
            };
            if let Some(next) = try_substitute(g, d.id(), repl) {
                return Some(next);
            }
        }
    }
    None
}

/// Drop projection outputs no consumer needs, and project other operators
/// down to their needed columns. Inputs of set operators keep their arity.
pub(super) fn project_to_icols_step(g: &QueryGraph) -> Option<QueryGraph> {
    let icols = infer_icols(g);
    let parents = g.parents();
    let root = g.root().id();
    for n in g.topo_order() {
        if n.id() == root {
            continue;
        }
        let ps: Vec<NodeRef> = parents[&n.id()].iter().filter_map(|p| g.node(*p)).collect();
        if ps.iter().any(|p| p.op().is_set_op()) {
            continue;
        }
        let needed = &icols[&n.id()];
        let mut keep: Vec<&String> = n.schema().iter().filter(|a| needed.contains(*a)).collect();
        if keep.len() == n.schema().len() {
            continue;
        }
        if keep.is_empty() {
            keep.push(&n.schema().names()[0]);
        }
        let repl = match n.op() {
            Operator::Project(items) => {
                let pruned = items
                    .iter()
                    .filter(|it| keep.contains(&&it.name))
                    .cloned()
                    .collect();
                Node::with_flags(Operator::Project(pruned), n.inputs().to_vec(), n.flags())
            }
            _ if ps.iter().all(|p| matches!(p.op(), Operator::Project(_))) => continue,
            _ => Node::project_attrs(&keep, n.clone()),
        };
        let Ok(repl) = repl else { continue };
        if let Some(next) = try_substitute(g, n.id(), repl) {
            return Some(next);
        }
    }
    None
}

pub(super) fn remove_window_step(g: &QueryGraph) -> Option<QueryGraph> {
    let icols = infer_icols(g);
    for n in g.topo_order() {
        let Operator::Window { call, .. } = n.op() else {
            continue;
        };
        if n.id() == g.root().id() || icols[&n.id()].contains(&call.out) {
            continue;
        }
        if let Some(next) = try_substitute(g, n.id(), n.input(0).clone()) {
            return Some(next);
        }
    }
    None
}

pub(super) fn remove_dupelim_by_key_step(g: &QueryGraph, base: &BaseKeys) -> Option<QueryGraph> {
    let keys = infer_keys(g, base);
    for n in g.topo_order() {
        if !matches!(n.op(), Operator::DupElim) || keys[&n.input(0).id()].is_empty() {
            continue;
        }
        if let Some(next) = try_substitute(g, n.id(), n.input(0).clone()) {
            return Some(next);
        }
    }
    None
}

pub(super) fn remove_dupelim_by_set_step(
    g: &QueryGraph,
    ctx: &mut Ctx<'_>,
) -> Result<Option<QueryGraph>, PatError> {
    let set = infer_set(g);
    for n in g.topo_order() {
        if !matches!(n.op(), Operator::DupElim) || n.flags().keep || !set[&n.id()] {
            continue;
        }
        let repl = if ctx.config.dupelim_choice && ctx.hook.make_choice(2)? == 1 {
            Node::with_new_flags(
                &n,
                NodeFlags {
                    keep: true,
                    ..n.flags()
                },
            )
        } else {
            n.input(0).clone()
        };
        if let Some(next) = try_substitute(g, n.id(), repl) {
            return Ok(Some(next));
        }
    }
    Ok(None)
}
