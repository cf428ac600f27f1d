use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::fan_out;
use crate::algebra::{ArithOp, Expr, Node, NodeId, NodeRef, Operator, QueryGraph};
use crate::properties::{infer_ec, EcItem, EquivClasses};

/// Outcome of pushing one conjunct into a subplan.
#[derive(Debug, Clone)]
pub enum Sink {
    /// The conjunct was placed; this is the rewritten subplan.
    Pushed(NodeRef),
    /// An identical conjunct already filters this path.
    Present,
    /// The conjunct cannot go below the subplan's top operator.
    Blocked,
}

fn may_fail(e: &Expr) -> bool {
    matches!(e, Expr::Arith(ArithOp::Div, ..)) || e.children().into_iter().any(may_fail)
}

/// Place `cond` as far down into `node` as it can go, never inside a node
/// listed in `shared` (that would change the result for its other
/// consumers). Conditions that can raise errors are not moved below other
/// selections.
pub fn sink_selection(cond: &Expr, node: &NodeRef, shared: &BTreeSet<NodeId>) -> Sink {
    if shared.contains(&node.id()) {
        return Sink::Blocked;
    }
    let cols = cond.columns();
    let below = |c: &Expr, child: &NodeRef, i: usize| -> Option<NodeRef> {
        let placed = match sink_selection(c, child, shared) {
            Sink::Pushed(x) => x,
            Sink::Present => return None,
            Sink::Blocked => Node::select(c.clone(), child.clone()).ok()?,
        };
        let mut inputs = node.inputs().to_vec();
        inputs[i] = placed;
        Node::rebuild(node, inputs).ok()
    };
    let into = |c: &Expr, i: usize| match below(c, node.input(i), i) {
        Some(n) => Sink::Pushed(n),
        None => Sink::Present,
    };
    match node.op() {
        Operator::Select(phi) => {
            let parts = phi.conjuncts();
            if parts.contains(cond) {
                return Sink::Present;
            }
            if !may_fail(cond) {
                match sink_selection(cond, node.input(0), shared) {
                    Sink::Pushed(x) => {
                        return Node::rebuild(node, alloc::vec![x])
                            .map_or(Sink::Blocked, Sink::Pushed)
                    }
                    Sink::Present => return Sink::Present,
                    Sink::Blocked => {}
                }
            }
            let mut parts = parts;
            parts.push(cond.clone());
            Node::with_flags(
                Operator::Select(Expr::conjunction(parts)),
                node.inputs().to_vec(),
                node.flags(),
            )
            .map_or(Sink::Blocked, Sink::Pushed)
        }
        _ if may_fail(cond) => Sink::Blocked,
        Operator::Project(items) => {
            let mut map = BTreeMap::new();
            for c in &cols {
                match items.iter().find(|it| it.name == *c) {
                    Some(it) if matches!(it.expr, Expr::Attr(_) | Expr::Const(_)) => {
                        map.insert(c.clone(), it.expr.clone());
                    }
                    _ => return Sink::Blocked,
                }
            }
            into(&cond.substitute(&map), 0)
        }
        Operator::Join(_) | Operator::Cross => {
            let side = |i: usize| cols.iter().all(|c| node.input(i).schema().contains(c));
            if side(0) {
                into(cond, 0)
            } else if side(1) {
                into(cond, 1)
            } else {
                Sink::Blocked
            }
        }
        Operator::DupElim => into(cond, 0),
        Operator::Diff => into(cond, 0),
        Operator::Union | Operator::Intersect => {
            let rename: BTreeMap<String, String> = node
                .schema()
                .iter()
                .cloned()
                .zip(node.input(1).schema().iter().cloned())
                .collect();
            let right_cond = cond.rename(&rename);
            let mut inputs = node.inputs().to_vec();
            let mut changed = false;
            for (i, c) in [(0, cond.clone()), (1, right_cond)] {
                let child = node.input(i);
                let placed = match sink_selection(&c, child, shared) {
                    Sink::Pushed(x) => x,
                    Sink::Present => continue,
                    Sink::Blocked => match Node::select(c, child.clone()) {
                        Ok(s) => s,
                        Err(_) => return Sink::Blocked,
                    },
                };
                inputs[i] = placed;
                changed = true;
            }
            if !changed {
                return Sink::Present;
            }
            Node::rebuild(node, inputs).map_or(Sink::Blocked, Sink::Pushed)
        }
        Operator::Agg { group_by, .. } if cols.iter().all(|c| group_by.contains(c)) => {
            into(cond, 0)
        }
        Operator::Window { partition_by, .. } if cols.iter().all(|c| partition_by.contains(c)) => {
            into(cond, 0)
        }
        _ => Sink::Blocked,
    }
}

/// Conjuncts of the selections directly on top of `node`.
fn top_conjuncts(node: &NodeRef) -> Vec<Expr> {
    let mut out = Vec::new();
    let mut cur = node;
    while let Operator::Select(c) = cur.op() {
        out.extend(c.conjuncts());
        cur = cur.input(0);
    }
    out
}

/// Selections implied at a join or cross product for one of its inputs.
fn derived_for_side(
    classes: &EquivClasses,
    side_ec: Option<&EquivClasses>,
    this: &NodeRef,
    other: &NodeRef,
) -> Vec<Expr> {
    let mine = this.schema();
    let mut out = Vec::new();
    for class in classes.classes() {
        let attrs: Vec<&str> = class
            .iter()
            .filter_map(|i| i.as_attr())
            .filter(|a| mine.contains(a))
            .collect();
        let Some(first) = attrs.first() else { continue };
        let known = |a: &EcItem, b: &EcItem| side_ec.is_some_and(|e| e.same_class(a, b));
        match class.iter().find(|i| matches!(i, EcItem::Const(_))) {
            Some(c) => {
                for a in &attrs {
                    if !known(&EcItem::attr(*a), c) {
                        out.push(Expr::Attr((*a).into()).eq(c.to_expr()));
                    }
                }
            }
            None => {
                for a in &attrs[1..] {
                    if !known(&EcItem::attr(*first), &EcItem::attr(*a)) {
                        out.push(Expr::Attr((*first).into()).eq(Expr::Attr((*a).into())));
                    }
                }
            }
        }
    }
    // Conditions on the other input carry over through equivalent attributes.
    for theta in top_conjuncts(other) {
        if may_fail(&theta) {
            continue;
        }
        let mut map = BTreeMap::new();
        for c in theta.columns() {
            let target = classes.class_of(&c).and_then(|cl| {
                cl.iter()
                    .filter_map(|i| i.as_attr())
                    .find(|a| mine.contains(a))
            });
            match target {
                Some(t) => {
                    map.insert(c, String::from(t));
                }
                None => break,
            }
        }
        if map.len() == theta.columns().len() {
            out.push(theta.rename(&map));
        }
    }
    out
}

fn place(conds: Vec<Expr>, node: NodeRef, shared: &BTreeSet<NodeId>) -> NodeRef {
    let mut cur = node;
    for c in conds {
        match sink_selection(&c, &cur, shared) {
            Sink::Pushed(x) => cur = x,
            Sink::Present => {}
            Sink::Blocked => {
                if let Ok(s) = Node::select(c, cur.clone()) {
                    cur = s;
                }
            }
        }
    }
    cur
}

/// Introduce selections implied by equivalence classes at joins, copy
/// conditions across join inputs, and push all selections down.
pub(super) fn selection_move_around(g: &QueryGraph) -> QueryGraph {
    let ec = infer_ec(g);
    let fan = fan_out(g);
    let mut shared: BTreeSet<NodeId> = fan
        .iter()
        .filter(|(_, c)| **c > 1)
        .map(|(id, _)| *id)
        .collect();
    let rewritten = g.transform_up::<(), _>(|n, inputs| {
        let new = match n.op() {
            Operator::Join(_) | Operator::Cross => {
                let classes = &ec.full[&n.id()];
                let left_ec = ec.bottom_up.get(&n.input(0).id());
                let right_ec = ec.bottom_up.get(&n.input(1).id());
                let for_left = derived_for_side(classes, left_ec, &inputs[0], &inputs[1]);
                let for_right = derived_for_side(classes, right_ec, &inputs[1], &inputs[0]);
                let l = place(for_left, inputs[0].clone(), &shared);
                let r = place(for_right, inputs[1].clone(), &shared);
                Node::rebuild(n, alloc::vec![l, r]).unwrap_or_else(|_| n.clone())
            }
            Operator::Select(cond) => {
                let child = inputs[0].clone();
                let mut kept = Vec::new();
                let mut cur = child;
                for c in cond.conjuncts() {
                    if may_fail(&c) {
                        kept.push(c);
                        continue;
                    }
                    match sink_selection(&c, &cur, &shared) {
                        Sink::Pushed(x) => cur = x,
                        Sink::Present => {}
                        Sink::Blocked => kept.push(c),
                    }
                }
                if kept.is_empty() {
                    cur
                } else {
                    Node::with_flags(
                        Operator::Select(Expr::conjunction(kept)),
                        alloc::vec![cur],
                        n.flags(),
                    )
                    .unwrap_or_else(|_| n.clone())
                }
            }
            _ => Node::rebuild(n, inputs).unwrap_or_else(|_| n.clone()),
        };
        if shared.contains(&n.id()) {
            shared.insert(new.id());
        }
        Ok(new)
    });
    match rewritten {
        Ok(r) if r.schema() == g.schema() => r,
        _ => g.clone(),
    }
}
