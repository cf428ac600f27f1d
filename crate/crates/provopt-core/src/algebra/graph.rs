use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use super::{AggCall, AlgebraError, Expr, Frame, Operator, ProjItem, Schema};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Process-unique node identity. Structurally equal nodes built separately
/// have different ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u64);

impl NodeId {
    fn fresh() -> Self {
        NodeId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Annotations that travel with a node but do not affect its result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeFlags {
    /// Emit as a materialized common table expression.
    pub materialize: bool,
    /// Duplicate elimination retained by an optimizer decision.
    pub keep: bool,
}

#[derive(Debug)]
pub struct Node {
    id: NodeId,
    op: Operator,
    inputs: Vec<NodeRef>,
    schema: Schema,
    flags: NodeFlags,
}

pub type NodeRef = Arc<Node>;

fn expect_inputs(op: &Operator, inputs: &[NodeRef]) -> Result<(), AlgebraError> {
    if inputs.len() != op.arity() {
        return Err(AlgebraError::InputCount {
            op: op.kind(),
            expected: op.arity(),
            got: inputs.len(),
        });
    }
    Ok(())
}

fn check_names(names: &[String], schema: &Schema) -> Result<(), AlgebraError> {
    for n in names {
        schema.resolve(n)?;
    }
    Ok(())
}

/// Output schema of `op` applied to inputs with the given schemas.
pub fn schema_of(op: &Operator, inputs: &[&Schema]) -> Result<Schema, AlgebraError> {
    let one = || inputs[0];
    match op {
        Operator::Relation { schema, .. } => Ok(schema.clone()),
        Operator::Select(cond) => {
            cond.check(one())?;
            Ok(one().clone())
        }
        Operator::Project(items) => {
            if items.is_empty() {
                return Err(AlgebraError::InvalidOperator(
                    "projection without items".into(),
                ));
            }
            for it in items {
                it.expr.check(one())?;
            }
            Schema::new(items.iter().map(|i| i.name.clone()).collect())
        }
        Operator::Join(on) => {
            if on.is_empty() {
                return Err(AlgebraError::InvalidOperator(
                    "join without condition".into(),
                ));
            }
            for (l, r) in on {
                inputs[0].resolve(l)?;
                inputs[1].resolve(r)?;
            }
            inputs[0].concat(inputs[1])
        }
        Operator::Cross => inputs[0].concat(inputs[1]),
        Operator::Union | Operator::Intersect | Operator::Diff => {
            if inputs[0].len() != inputs[1].len() {
                return Err(AlgebraError::ArityMismatch {
                    left: inputs[0].len(),
                    right: inputs[1].len(),
                });
            }
            Ok(inputs[0].clone())
        }
        Operator::Agg { group_by, aggs } => {
            if aggs.is_empty() {
                return Err(AlgebraError::InvalidOperator(
                    "aggregation without functions".into(),
                ));
            }
            check_names(group_by, one())?;
            let mut names = group_by.clone();
            for a in aggs {
                one().resolve(&a.arg)?;
                names.push(a.out.clone());
            }
            Schema::new(names)
        }
        Operator::DupElim => Ok(one().clone()),
        Operator::Window {
            call,
            partition_by,
            order_by,
            ..
        } => {
            one().resolve(&call.arg)?;
            check_names(partition_by, one())?;
            check_names(order_by, one())?;
            let mut names = one().names().to_vec();
            names.push(call.out.clone());
            Schema::new(names)
        }
    }
}

impl Node {
    pub fn new(op: Operator, inputs: Vec<NodeRef>) -> Result<NodeRef, AlgebraError> {
        Node::with_flags(op, inputs, NodeFlags::default())
    }

    pub fn with_flags(
        op: Operator,
        inputs: Vec<NodeRef>,
        flags: NodeFlags,
    ) -> Result<NodeRef, AlgebraError> {
        expect_inputs(&op, &inputs)?;
        let schemas: Vec<&Schema> = inputs.iter().map(|i| &i.schema).collect();
        let schema = schema_of(&op, &schemas)?;
        Ok(Arc::new(Node {
            id: NodeId::fresh(),
            op,
            inputs,
            schema,
            flags,
        }))
    }

    pub fn relation(name: impl Into<String>, schema: Schema) -> NodeRef {
        let op = Operator::Relation {
            name: name.into(),
            schema: schema.clone(),
        };
        Arc::new(Node {
            id: NodeId::fresh(),
            op,
            inputs: Vec::new(),
            schema,
            flags: NodeFlags::default(),
        })
    }

    pub fn select(cond: Expr, input: NodeRef) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::Select(cond), vec![input])
    }

    pub fn project(items: Vec<ProjItem>, input: NodeRef) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::Project(items), vec![input])
    }

    /// Projection onto a list of existing attributes.
    pub fn project_attrs<S: AsRef<str>>(
        names: &[S],
        input: NodeRef,
    ) -> Result<NodeRef, AlgebraError> {
        Node::project(
            names.iter().map(|n| ProjItem::keep(n.as_ref())).collect(),
            input,
        )
    }

    pub fn join(
        on: Vec<(String, String)>,
        left: NodeRef,
        right: NodeRef,
    ) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::Join(on), vec![left, right])
    }

    pub fn join_on(
        l: &str,
        r: &str,
        left: NodeRef,
        right: NodeRef,
    ) -> Result<NodeRef, AlgebraError> {
        Node::join(vec![(l.into(), r.into())], left, right)
    }

    pub fn cross(left: NodeRef, right: NodeRef) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::Cross, vec![left, right])
    }

    pub fn union(left: NodeRef, right: NodeRef) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::Union, vec![left, right])
    }

    pub fn intersect(left: NodeRef, right: NodeRef) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::Intersect, vec![left, right])
    }

    pub fn diff(left: NodeRef, right: NodeRef) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::Diff, vec![left, right])
    }

    pub fn agg(
        group_by: Vec<String>,
        aggs: Vec<AggCall>,
        input: NodeRef,
    ) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::Agg { group_by, aggs }, vec![input])
    }

    pub fn dup_elim(input: NodeRef) -> Result<NodeRef, AlgebraError> {
        Node::new(Operator::DupElim, vec![input])
    }

    pub fn window(
        call: AggCall,
        partition_by: Vec<String>,
        order_by: Vec<String>,
        frame: Frame,
        input: NodeRef,
    ) -> Result<NodeRef, AlgebraError> {
        Node::new(
            Operator::Window {
                call,
                partition_by,
                order_by,
                frame,
            },
            vec![input],
        )
    }

    /// Join that first renames attributes of `right` clashing with `left`
    /// (suffix `_1`, `_2`, ...) through a projection. The condition is
    /// rewritten to the new names; the projection records the renaming.
    pub fn join_disambiguated(
        on: Vec<(String, String)>,
        left: NodeRef,
        right: NodeRef,
    ) -> Result<NodeRef, AlgebraError> {
        let (right, renames) = disambiguate(&left, right)?;
        let on = on
            .into_iter()
            .map(|(l, r)| {
                let r = renames.get(&r).cloned().unwrap_or(r);
                (l, r)
            })
            .collect();
        Node::join(on, left, right)
    }

    pub fn cross_disambiguated(left: NodeRef, right: NodeRef) -> Result<NodeRef, AlgebraError> {
        let (right, _) = disambiguate(&left, right)?;
        Node::cross(left, right)
    }

    /// Same operator and flags over new inputs; returns `node` itself when
    /// the inputs are unchanged.
    pub fn rebuild(node: &NodeRef, inputs: Vec<NodeRef>) -> Result<NodeRef, AlgebraError> {
        if inputs.len() == node.inputs.len()
            && inputs
                .iter()
                .zip(&node.inputs)
                .all(|(a, b)| Arc::ptr_eq(a, b))
        {
            return Ok(node.clone());
        }
        Node::with_flags(node.op.clone(), inputs, node.flags)
    }

    pub fn with_new_flags(node: &NodeRef, flags: NodeFlags) -> NodeRef {
        Arc::new(Node {
            id: NodeId::fresh(),
            op: node.op.clone(),
            inputs: node.inputs.clone(),
            schema: node.schema.clone(),
            flags,
        })
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn inputs(&self) -> &[NodeRef] {
        &self.inputs
    }

    pub fn input(&self, i: usize) -> &NodeRef {
        &self.inputs[i]
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn flags(&self) -> NodeFlags {
        self.flags
    }

    /// Total size of the expressions held by this operator.
    pub fn expr_size(&self) -> usize {
        match &self.op {
            Operator::Select(c) => c.size(),
            Operator::Project(items) => items.iter().map(|i| i.expr.size()).sum(),
            _ => 0,
        }
    }
}

fn disambiguate(
    left: &NodeRef,
    right: NodeRef,
) -> Result<(NodeRef, BTreeMap<String, String>), AlgebraError> {
    let taken: BTreeSet<&String> = left.schema().iter().chain(right.schema().iter()).collect();
    let mut renames = BTreeMap::new();
    for n in right.schema().iter() {
        if left.schema().contains(n) {
            let mut k = 1;
            let fresh = loop {
                let cand = format!("{n}_{k}");
                if !taken.contains(&cand) && !renames.values().any(|v: &String| *v == cand) {
                    break cand;
                }
                k += 1;
            };
            renames.insert(n.clone(), fresh);
        }
    }
    if renames.is_empty() {
        return Ok((right, renames));
    }
    let items = right
        .schema()
        .iter()
        .map(|n| match renames.get(n) {
            Some(new) => ProjItem::new(Expr::Attr(n.clone()), new.clone()),
            None => ProjItem::keep(n.clone()),
        })
        .collect();
    Ok((Node::project(items, right)?, renames))
}

/// Relationship of one node to another within a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ancestry {
    NotAncestor,
    /// Some path from the first node to the root passes through the second.
    Ancestor,
    /// Every such path does.
    OnAllPaths,
}

/// Immutable query DAG identified by its root. Rewrites return new graphs
/// that share all untouched nodes with the original.
#[derive(Debug, Clone)]
pub struct QueryGraph {
    root: NodeRef,
}

impl QueryGraph {
    pub fn new(root: NodeRef) -> Self {
        QueryGraph { root }
    }

    pub fn root(&self) -> &NodeRef {
        &self.root
    }

    pub fn schema(&self) -> &Schema {
        self.root.schema()
    }

    /// All nodes, each once, inputs before the nodes that consume them.
    pub fn topo_order(&self) -> Vec<NodeRef> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack: Vec<(NodeRef, bool)> = vec![(self.root.clone(), false)];
        while let Some((n, expanded)) = stack.pop() {
            if expanded {
                out.push(n);
                continue;
            }
            if !seen.insert(n.id()) {
                continue;
            }
            stack.push((n.clone(), true));
            for c in n.inputs().iter().rev() {
                if !seen.contains(&c.id()) {
                    stack.push((c.clone(), false));
                }
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.topo_order().len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn node(&self, id: NodeId) -> Option<NodeRef> {
        self.topo_order().into_iter().find(|n| n.id() == id)
    }

    /// Parent ids per node, one entry per edge.
    pub fn parents(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for n in self.topo_order() {
            out.entry(n.id()).or_default();
            for c in n.inputs() {
                out.entry(c.id()).or_default().push(n.id());
            }
        }
        out
    }

    /// Sum of expression sizes over all nodes.
    pub fn total_expr_size(&self) -> usize {
        self.topo_order().iter().map(|n| n.expr_size()).sum()
    }

    /// Rebuild the graph bottom-up. `f` receives each original node with
    /// its already rewritten inputs; shared nodes are visited once.
    pub fn transform_up<E, F>(&self, mut f: F) -> Result<QueryGraph, E>
    where
        F: FnMut(&NodeRef, Vec<NodeRef>) -> Result<NodeRef, E>,
    {
        let mut memo: BTreeMap<NodeId, NodeRef> = BTreeMap::new();
        for n in self.topo_order() {
            let inputs = n.inputs().iter().map(|c| memo[&c.id()].clone()).collect();
            let new = f(&n, inputs)?;
            memo.insert(n.id(), new);
        }
        Ok(QueryGraph::new(memo[&self.root.id()].clone()))
    }

    /// Replace `target` by `replacement` for every parent of `target`.
    pub fn substitute(
        &self,
        target: NodeId,
        replacement: NodeRef,
    ) -> Result<QueryGraph, AlgebraError> {
        let parents = self.parents();
        if !parents.contains_key(&target) {
            return Err(AlgebraError::NodeNotFound);
        }
        let above = self.strict_ancestors(target, &parents);
        let repl = QueryGraph::new(replacement.clone());
        if repl.topo_order().iter().any(|n| above.contains(&n.id())) {
            return Err(AlgebraError::Cycle);
        }
        self.transform_up(|n, inputs| {
            if n.id() == target {
                Ok(replacement.clone())
            } else {
                Node::rebuild(n, inputs)
            }
        })
    }

    fn strict_ancestors(
        &self,
        id: NodeId,
        parents: &BTreeMap<NodeId, Vec<NodeId>>,
    ) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack = parents.get(&id).cloned().unwrap_or_default();
        while let Some(p) = stack.pop() {
            if out.insert(p) {
                stack.extend(parents[&p].iter().copied());
            }
        }
        out
    }

    /// How `upper` relates to `lower` when walking from `lower` to the root.
    pub fn ancestry(&self, lower: NodeId, upper: NodeId) -> Ancestry {
        if lower == upper {
            return Ancestry::NotAncestor;
        }
        let parents = self.parents();
        if !parents.contains_key(&lower) || !self.strict_ancestors(lower, &parents).contains(&upper)
        {
            return Ancestry::NotAncestor;
        }
        // Can the root be reached from `lower` without passing `upper`?
        let root = self.root.id();
        let mut seen = BTreeSet::new();
        let mut stack = vec![lower];
        while let Some(n) = stack.pop() {
            if n == root {
                return Ancestry::Ancestor;
            }
            for p in &parents[&n] {
                if *p != upper && seen.insert(*p) {
                    stack.push(*p);
                }
            }
        }
        Ancestry::OnAllPaths
    }

    /// Same operators, flags and input structure, ignoring node ids.
    pub fn structurally_eq(&self, other: &QueryGraph) -> bool {
        let mut memo = BTreeSet::new();
        nodes_eq(&self.root, &other.root, &mut memo)
    }
}

fn nodes_eq(a: &NodeRef, b: &NodeRef, memo: &mut BTreeSet<(NodeId, NodeId)>) -> bool {
    if Arc::ptr_eq(a, b) || memo.contains(&(a.id(), b.id())) {
        return true;
    }
    let eq = a.op() == b.op()
        && a.flags() == b.flags()
        && a.inputs().len() == b.inputs().len()
        && a.inputs()
            .iter()
            .zip(b.inputs())
            .all(|(x, y)| nodes_eq(x, y, memo));
    if eq {
        memo.insert((a.id(), b.id()));
    }
    eq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{attr, lit, AggFunc};

    fn rel(name: &str, cols: &[&str]) -> NodeRef {
        Node::relation(name, Schema::from_names(cols.iter().copied()).unwrap())
    }

    #[test]
    fn schemas_are_derived() {
        let r = rel("R", &["a", "b"]);
        let s = rel("S", &["c"]);
        let j = Node::join_on("a", "c", r.clone(), s).unwrap();
        assert_eq!(j.schema().names(), ["a", "b", "c"]);
        let g = Node::agg(
            vec!["b".into()],
            vec![AggCall::new(AggFunc::Sum, "a", "x")],
            r.clone(),
        )
        .unwrap();
        assert_eq!(g.schema().names(), ["b", "x"]);
        let w = Node::window(
            AggCall::new(AggFunc::Count, "a", "n"),
            vec!["b".into()],
            vec![],
            Frame::Running,
            r,
        )
        .unwrap();
        assert_eq!(w.schema().names(), ["a", "b", "n"]);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let r = rel("R", &["a", "b"]);
        assert_eq!(
            Node::select(attr("z").eq(lit(1)), r.clone()).unwrap_err(),
            AlgebraError::UnresolvedAttribute("z".into())
        );
        assert!(matches!(
            Node::cross(r.clone(), r.clone()),
            Err(AlgebraError::DuplicateAttribute(_))
        ));
        let s = rel("S", &["c"]);
        assert!(matches!(
            Node::union(r, s),
            Err(AlgebraError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn collisions_get_suffixes() {
        let r = rel("R", &["a", "b"]);
        let j =
            Node::join_disambiguated(vec![("a".into(), "a".into())], r.clone(), r.clone()).unwrap();
        assert_eq!(j.schema().names(), ["a", "b", "a_1", "b_1"]);
        assert_eq!(j.op(), &Operator::Join(vec![("a".into(), "a_1".into())]));
    }

    #[test]
    fn substitution_shares_untouched_nodes() {
        let r = rel("R", &["a"]);
        let s = rel("S", &["b"]);
        let sel = Node::select(attr("a").gt(lit(1)), r.clone()).unwrap();
        let root = Node::cross(sel.clone(), s.clone()).unwrap();
        let g = QueryGraph::new(root);
        let r2 = rel("R2", &["a"]);
        let g2 = g.substitute(r.id(), r2.clone()).unwrap();
        assert!(Arc::ptr_eq(g2.root().input(1), &s));
        assert!(Arc::ptr_eq(g2.root().input(0).input(0), &r2));
        assert!(Arc::ptr_eq(g.root().input(0), &sel));
    }

    #[test]
    fn substitution_rebinds_every_parent() {
        let r = rel("R", &["a"]);
        let l = Node::select(attr("a").gt(lit(1)), r.clone()).unwrap();
        let rr = Node::project(vec![ProjItem::new(attr("a"), "b")], r.clone()).unwrap();
        let g = QueryGraph::new(Node::cross(l, rr).unwrap());
        let r2 = rel("R2", &["a"]);
        let g2 = g.substitute(r.id(), r2.clone()).unwrap();
        assert!(!g2.contains(r.id()));
        assert_eq!(g2.parents()[&r2.id()].len(), 2);
    }

    #[test]
    fn substitution_rejects_cycles() {
        let r = rel("R", &["a"]);
        let sel = Node::select(attr("a").gt(lit(1)), r.clone()).unwrap();
        let top = Node::dup_elim(sel.clone()).unwrap();
        let g = QueryGraph::new(top.clone());
        assert_eq!(g.substitute(r.id(), sel).unwrap_err(), AlgebraError::Cycle);
    }

    #[test]
    fn ancestry_kinds() {
        let r = rel("R", &["a"]);
        let sel = Node::select(attr("a").gt(lit(1)), r.clone()).unwrap();
        let other = Node::project(vec![ProjItem::new(attr("a"), "b")], r.clone()).unwrap();
        let root = Node::cross(sel.clone(), other).unwrap();
        let g = QueryGraph::new(root.clone());
        assert_eq!(g.ancestry(r.id(), sel.id()), Ancestry::Ancestor);
        assert_eq!(g.ancestry(r.id(), root.id()), Ancestry::OnAllPaths);
        assert_eq!(g.ancestry(root.id(), r.id()), Ancestry::NotAncestor);
        assert_eq!(g.ancestry(sel.id(), root.id()), Ancestry::OnAllPaths);
    }

    #[test]
    fn structural_equality_ignores_ids() {
        let build = || {
            let r = rel("R", &["a"]);
            QueryGraph::new(Node::select(attr("a").gt(lit(1)), r).unwrap())
        };
        assert!(build().structurally_eq(&build()));
        let other = QueryGraph::new(Node::select(attr("a").gt(lit(2)), rel("R", &["a"])).unwrap());
        assert!(!build().structurally_eq(&other));
    }

    #[test]
    fn topo_order_lists_shared_nodes_once() {
        let r = rel("R", &["a"]);
        let l = Node::select(attr("a").gt(lit(1)), r.clone()).unwrap();
        let rr = Node::project(vec![ProjItem::new(attr("a"), "b")], r.clone()).unwrap();
        let g = QueryGraph::new(Node::cross(l, rr).unwrap());
        let order = g.topo_order();
        assert_eq!(order.len(), 4);
        assert_eq!(order[0].id(), r.id());
    }
}
