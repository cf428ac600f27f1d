use alloc::collections::BTreeMap;

use crate::algebra::{NodeId, NodeRef, Operator, QueryGraph};

/// Whether `parent` lets its inputs ignore duplicates, given its own flag.
///
/// Aggregation, windows and bag difference count duplicates, so they reset
/// the flag; duplicate elimination sets it.
pub fn set_for_input(parent: &NodeRef, parent_set: bool) -> bool {
    match parent.op() {
        Operator::DupElim => true,
        Operator::Agg { .. } | Operator::Window { .. } | Operator::Diff => false,
        _ => parent_set,
    }
}

/// False at the root; the conjunction over consumers elsewhere.
pub fn infer_set(graph: &QueryGraph) -> BTreeMap<NodeId, bool> {
    let mut acc: BTreeMap<NodeId, bool> = BTreeMap::new();
    acc.insert(graph.root().id(), false);
    for n in graph.topo_order().iter().rev() {
        let own = acc[&n.id()];
        let pass = set_for_input(n, own);
        for c in n.inputs() {
            let e = acc.entry(c.id()).or_insert(true);
            *e = *e && pass;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{attr, lit, AggCall, AggFunc, Node, Schema};

    #[test]
    fn dupelim_enables_set_semantics_below() {
        let r = Node::relation("R", Schema::from_names(["a"]).unwrap());
        let sel = Node::select(attr("a").gt(lit(1)), r.clone()).unwrap();
        let g = QueryGraph::new(Node::dup_elim(sel.clone()).unwrap());
        let s = infer_set(&g);
        assert!(!s[&g.root().id()]);
        assert!(s[&sel.id()]);
        assert!(s[&r.id()]);
    }

    #[test]
    fn aggregation_blocks_set_semantics() {
        let r = Node::relation("R", Schema::from_names(["a"]).unwrap());
        let agg = Node::agg(
            vec![],
            vec![AggCall::new(AggFunc::Count, "a", "n")],
            r.clone(),
        )
        .unwrap();
        let g = QueryGraph::new(Node::dup_elim(agg.clone()).unwrap());
        let s = infer_set(&g);
        assert!(s[&agg.id()]);
        assert!(!s[&r.id()]);
    }

    #[test]
    fn shared_nodes_need_every_consumer() {
        let r = Node::relation("R", Schema::from_names(["a"]).unwrap());
        let d = Node::dup_elim(r.clone()).unwrap();
        let g = QueryGraph::new(Node::union(d, r.clone()).unwrap());
        assert!(!infer_set(&g)[&r.id()]);
    }
}
