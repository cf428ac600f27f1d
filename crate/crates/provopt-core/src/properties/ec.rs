use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::cnf::{to_cnf, DEFAULT_CLAUSE_CAP};
use crate::algebra::{CmpOp, Expr, NodeId, NodeRef, Operator, QueryGraph, Schema, Value};

/// Member of an equivalence class: an attribute or a constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum EcItem {
    Attr(String),
    Const(Value),
}

impl EcItem {
    pub fn attr(name: impl Into<String>) -> Self {
        EcItem::Attr(name.into())
    }

    pub fn as_attr(&self) -> Option<&str> {
        match self {
            EcItem::Attr(a) => Some(a),
            EcItem::Const(_) => None,
        }
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            EcItem::Attr(a) => Expr::Attr(a.clone()),
            EcItem::Const(v) => Expr::Const(v.clone()),
        }
    }
}

impl fmt::Display for EcItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EcItem::Attr(a) => f.write_str(a),
            EcItem::Const(Value::Str(s)) => write!(f, "'{s}'"),
            EcItem::Const(v) => write!(f, "{v}"),
        }
    }
}

pub type EcClass = BTreeSet<EcItem>;

/// Partition of a node's attributes (plus constants) into classes of
/// values that are equal in every result tuple, or may be forced equal
/// without changing the query result.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EquivClasses(Vec<EcClass>);

impl EquivClasses {
    /// Transitive closure of `classes`, restricted to `schema` attributes,
    /// with every schema attribute present. Classes holding only constants
    /// are dropped.
    pub fn close<I: IntoIterator<Item = EcClass>>(classes: I, schema: &Schema) -> Self {
        let mut all: Vec<EcClass> = schema
            .iter()
            .map(|a| [EcItem::attr(a.clone())].into_iter().collect())
            .collect();
        all.extend(classes.into_iter().map(|c| {
            c.into_iter()
                .filter(|i| match i {
                    EcItem::Attr(a) => schema.contains(a),
                    EcItem::Const(v) => !v.is_null(),
                })
                .collect()
        }));
        EquivClasses(merge_overlapping(all))
    }

    pub fn singletons(schema: &Schema) -> Self {
        EquivClasses::close(core::iter::empty(), schema)
    }

    pub fn classes(&self) -> &[EcClass] {
        &self.0
    }

    pub fn class_of(&self, attr: &str) -> Option<&EcClass> {
        self.0.iter().find(|c| c.contains(&EcItem::attr(attr)))
    }

    pub fn same_class(&self, a: &EcItem, b: &EcItem) -> bool {
        self.0.iter().any(|c| c.contains(a) && c.contains(b))
    }

    fn renamed(&self, map: &BTreeMap<String, String>) -> Vec<EcClass> {
        self.0
            .iter()
            .map(|c| {
                c.iter()
                    .map(|i| match i {
                        EcItem::Attr(a) => {
                            EcItem::Attr(map.get(a).cloned().unwrap_or_else(|| a.clone()))
                        }
                        other => other.clone(),
                    })
                    .collect()
            })
            .collect()
    }

    /// Classes of pairs equal in both partitions.
    pub fn meet(&self, other: &EquivClasses) -> Vec<EcClass> {
        let mut out = Vec::new();
        for a in &self.0 {
            for b in &other.0 {
                let i: EcClass = a.intersection(b).cloned().collect();
                if !i.is_empty() {
                    out.push(i);
                }
            }
        }
        out
    }
}

impl fmt::Display for EquivClasses {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str("{")?;
            for (j, item) in c.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{item}")?;
            }
            f.write_str("}")?;
        }
        f.write_str("}")
    }
}

/// Union-find style merge of overlapping sets; output sorted.
fn merge_overlapping(classes: Vec<EcClass>) -> Vec<EcClass> {
    let mut out: Vec<EcClass> = Vec::new();
    for c in classes {
        if c.is_empty() {
            continue;
        }
        let mut merged = c;
        let mut i = 0;
        while i < out.len() {
            if out[i].iter().any(|x| merged.contains(x)) {
                let other = out.swap_remove(i);
                merged.extend(other);
                i = 0;
            } else {
                i += 1;
            }
        }
        out.push(merged);
    }
    out.retain(|c| c.iter().any(|i| matches!(i, EcItem::Attr(_))));
    out.sort();
    out
}

/// Equality conjuncts `attr = attr` or `attr = const` of a condition.
pub fn equality_pairs(cond: &Expr) -> Vec<(EcItem, EcItem)> {
    let Ok(clauses) = to_cnf(cond, DEFAULT_CLAUSE_CAP) else {
        return Vec::new();
    };
    clauses
        .iter()
        .filter_map(|c| match c {
            Expr::Cmp(CmpOp::Eq, l, r) => match (l.as_ref(), r.as_ref()) {
                (Expr::Attr(a), Expr::Attr(b)) => {
                    Some((EcItem::attr(a.clone()), EcItem::attr(b.clone())))
                }
                (Expr::Attr(a), Expr::Const(v)) | (Expr::Const(v), Expr::Attr(a))
                    if !v.is_null() =>
                {
                    Some((EcItem::attr(a.clone()), EcItem::Const(v.clone())))
                }
                _ => None,
            },
            _ => None,
        })
        .collect()
}

fn pair(a: EcItem, b: EcItem) -> EcClass {
    [a, b].into_iter().collect()
}

/// Positional renaming from the right input's names to the left's.
fn positional(from: &Schema, to: &Schema) -> BTreeMap<String, String> {
    from.iter().cloned().zip(to.iter().cloned()).collect()
}

/// Bottom-up classes of one node from those of its inputs.
pub fn ec_bottom_up(node: &NodeRef, inputs: &[&EquivClasses]) -> EquivClasses {
    let schema = node.schema();
    let classes: Vec<EcClass> = match node.op() {
        Operator::Relation { .. } => Vec::new(),
        Operator::Select(cond) => {
            let mut c = inputs[0].0.clone();
            c.extend(equality_pairs(cond).into_iter().map(|(a, b)| pair(a, b)));
            c
        }
        Operator::Project(items) => {
            let mut c = Vec::new();
            for (i, x) in items.iter().enumerate() {
                for y in &items[i + 1..] {
                    if let (Some(a), Some(b)) = (x.expr.as_attr(), y.expr.as_attr()) {
                        if inputs[0].same_class(&EcItem::attr(a), &EcItem::attr(b)) {
                            c.push(pair(
                                EcItem::attr(x.name.clone()),
                                EcItem::attr(y.name.clone()),
                            ));
                        }
                    }
                }
            }
            c
        }
        Operator::Join(on) => {
            let mut c = inputs[0].0.clone();
            c.extend(inputs[1].0.iter().cloned());
            c.extend(
                on.iter()
                    .map(|(a, b)| pair(EcItem::attr(a.clone()), EcItem::attr(b.clone()))),
            );
            c
        }
        Operator::Cross => {
            let mut c = inputs[0].0.clone();
            c.extend(inputs[1].0.iter().cloned());
            c
        }
        Operator::Agg { group_by, .. } => inputs[0]
            .0
            .iter()
            .map(|e| {
                e.iter()
                    .filter(|i| i.as_attr().is_some_and(|a| group_by.iter().any(|g| g == a)))
                    .cloned()
                    .collect()
            })
            .collect(),
        Operator::DupElim | Operator::Diff | Operator::Window { .. } => inputs[0].0.clone(),
        Operator::Union => {
            let right = EquivClasses(
                inputs[1].renamed(&positional(node.input(1).schema(), node.input(0).schema())),
            );
            inputs[0].meet(&right)
        }
        Operator::Intersect => {
            let mut c = inputs[0].0.clone();
            c.extend(
                inputs[1].renamed(&positional(node.input(1).schema(), node.input(0).schema())),
            );
            c
        }
    };
    EquivClasses::close(classes, schema)
}

/// Classes that a parent lets its `idx`-th input assume. `None` stands for
/// "reset to singletons".
fn ec_for_input(parent: &NodeRef, parent_ec: &EquivClasses, idx: usize) -> Option<Vec<EcClass>> {
    let child_schema = parent.input(idx).schema();
    let restrict = |keep: &dyn Fn(&str) -> bool| -> Vec<EcClass> {
        parent_ec
            .0
            .iter()
            .map(|e| {
                e.iter()
                    .filter(|i| match i {
                        EcItem::Attr(a) => keep(a),
                        EcItem::Const(_) => true,
                    })
                    .cloned()
                    .collect()
            })
            .collect()
    };
    Some(match parent.op() {
        Operator::Relation { .. } => Vec::new(),
        Operator::Select(_) | Operator::DupElim => parent_ec.0.clone(),
        Operator::Project(items) => {
            let mut c = Vec::new();
            for (i, x) in items.iter().enumerate() {
                for y in &items[i + 1..] {
                    if let (Some(a), Some(b)) = (x.expr.as_attr(), y.expr.as_attr()) {
                        if parent_ec.same_class(
                            &EcItem::attr(x.name.clone()),
                            &EcItem::attr(y.name.clone()),
                        ) {
                            c.push(pair(EcItem::attr(a), EcItem::attr(b)));
                        }
                    }
                }
            }
            c
        }
        Operator::Join(_) | Operator::Cross => {
            let other = parent.input(1 - idx).schema();
            restrict(&|a| !other.contains(a))
        }
        // Only grouping / partition attributes: forcing equalities on them
        // removes whole groups, which the parent would remove anyway.
        Operator::Agg { group_by, .. } => restrict(&|a| group_by.iter().any(|g| g == a)),
        Operator::Window { partition_by, .. } => restrict(&|a| partition_by.iter().any(|g| g == a)),
        Operator::Union | Operator::Intersect => {
            if idx == 0 {
                parent_ec.0.clone()
            } else {
                parent_ec.renamed(&positional(parent.schema(), child_schema))
            }
        }
        Operator::Diff => {
            if idx == 0 {
                parent_ec.0.clone()
            } else {
                return None;
            }
        }
    })
}

/// Bottom-up classes and the final classes after the top-down pass.
#[derive(Debug, Clone, Default)]
pub struct EcResult {
    pub bottom_up: BTreeMap<NodeId, EquivClasses>,
    pub full: BTreeMap<NodeId, EquivClasses>,
}

pub fn infer_ec(graph: &QueryGraph) -> EcResult {
    let order = graph.topo_order();
    let mut bottom_up: BTreeMap<NodeId, EquivClasses> = BTreeMap::new();
    for n in &order {
        let inputs: Vec<&EquivClasses> = n.inputs().iter().map(|c| &bottom_up[&c.id()]).collect();
        let ec = ec_bottom_up(n, &inputs);
        bottom_up.insert(n.id(), ec);
    }

    // Contributions from every parent edge, combined by meet so that a
    // shared node only assumes what all of its consumers allow.
    let mut contrib: BTreeMap<NodeId, Vec<Option<EquivClasses>>> = BTreeMap::new();
    let mut full: BTreeMap<NodeId, EquivClasses> = BTreeMap::new();
    for n in order.iter().rev() {
        let own = &bottom_up[&n.id()];
        let ec = match contrib.remove(&n.id()) {
            None => own.clone(),
            Some(parts) => {
                if parts.iter().any(Option::is_none) {
                    EquivClasses::singletons(n.schema())
                } else {
                    let mut parts = parts.into_iter().flatten();
                    let first = parts.next().unwrap();
                    let met = parts.fold(first, |acc, p| EquivClasses(acc.meet(&p)));
                    let mut classes = own.0.clone();
                    classes.extend(met.0);
                    EquivClasses::close(classes, n.schema())
                }
            }
        };
        for (i, c) in n.inputs().iter().enumerate() {
            let part = ec_for_input(n, &ec, i).map(|cl| EquivClasses::close(cl, c.schema()));
            contrib.entry(c.id()).or_default().push(part);
        }
        full.insert(n.id(), ec);
    }
    EcResult { bottom_up, full }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{attr, lit, Node};
    use alloc::vec;

    fn cls(items: &[&[&str]]) -> Vec<EcClass> {
        items
            .iter()
            .map(|c| c.iter().map(|a| EcItem::attr(*a)).collect())
            .collect()
    }

    #[test]
    fn closure_merges_transitively() {
        let s = Schema::from_names(["a", "b", "c", "d"]).unwrap();
        let ec = EquivClasses::close(cls(&[&["a", "b"], &["c", "d"], &["b", "c"]]), &s);
        assert_eq!(ec.classes().len(), 1);
    }

    #[test]
    fn select_adds_equalities_and_constants() {
        let r = Node::relation("R", Schema::from_names(["a", "b", "c"]).unwrap());
        let cond = Expr::and(vec![
            attr("a").eq(lit(5)),
            attr("c").lt(lit(9)),
            attr("b").eq(attr("c")),
        ]);
        let g = QueryGraph::new(Node::select(cond, r).unwrap());
        let ec = &infer_ec(&g).full[&g.root().id()];
        let mut expected: EcClass = cls(&[&["b", "c"]]).remove(0);
        assert!(ec.classes().contains(&expected));
        expected = [EcItem::attr("a"), EcItem::Const(Value::Int(5))]
            .into_iter()
            .collect();
        assert!(ec.classes().contains(&expected));
    }

    #[test]
    fn union_keeps_common_equalities() {
        let r = Node::relation("R", Schema::from_names(["a", "b"]).unwrap());
        let s = Node::relation("S", Schema::from_names(["c", "d"]).unwrap());
        let l = Node::select(attr("a").eq(attr("b")), r).unwrap();
        let rr = Node::select(attr("c").eq(attr("d")), s).unwrap();
        let g = QueryGraph::new(Node::union(l, rr).unwrap());
        assert_eq!(
            infer_ec(&g).full[&g.root().id()].classes(),
            cls(&[&["a", "b"]]).as_slice()
        );
    }

    #[test]
    fn top_down_pushes_through_join() {
        let r = Node::relation("R", Schema::from_names(["a", "b"]).unwrap());
        let s = Node::relation("S", Schema::from_names(["c"]).unwrap());
        let j = Node::join_on("a", "c", r.clone(), s.clone()).unwrap();
        let g = QueryGraph::new(Node::select(attr("a").eq(lit(5)), j).unwrap());
        let res = infer_ec(&g);
        let five = EcItem::Const(Value::Int(5));
        assert!(res.full[&s.id()].same_class(&EcItem::attr("c"), &five));
        assert!(res.full[&r.id()].same_class(&EcItem::attr("a"), &five));
        assert!(!res.bottom_up[&r.id()].same_class(&EcItem::attr("a"), &five));
    }

    #[test]
    fn diff_resets_the_right_input() {
        let r = Node::relation("R", Schema::from_names(["a"]).unwrap());
        let s = Node::relation("S", Schema::from_names(["b"]).unwrap());
        let g = QueryGraph::new(
            Node::select(
                attr("a").eq(lit(1)),
                Node::diff(r.clone(), s.clone()).unwrap(),
            )
            .unwrap(),
        );
        let res = infer_ec(&g);
        assert!(res.full[&r.id()].same_class(&EcItem::attr("a"), &EcItem::Const(Value::Int(1))));
        assert_eq!(res.full[&s.id()], EquivClasses::singletons(s.schema()));
    }
}
