#[path = "../../provopt-core/tests/common/mod.rs"]
mod common;

use common::{random_query, rng, schema, Ops, RELATIONS};
use proptest::prelude::*;
use provopt::plan::{parse_expr, parse_plan, print_expr, print_plan, Catalog};
use provopt_core::algebra::{
    ArithOp, BoolOp, CmpOp, Expr, Node, NodeFlags, Operator, QueryGraph, Value,
};

fn catalog() -> Catalog {
    RELATIONS.iter().map(|(n, a)| (n.to_string(), schema(a))).collect()
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        prop::sample::select(vec!["a", "b", "x y", "select", "Q\"t", "_1"])
            .prop_map(|n| Expr::Attr(n.into())),
        any::<i64>().prop_map(|i| Expr::Const(Value::Int(i))),
        (-1e9f64..1e9).prop_map(|f| Expr::Const(Value::Float(f))),
        "[a-z '\"]{0,6}".prop_map(|s| Expr::Const(Value::Str(s))),
        any::<bool>().prop_map(|b| Expr::Const(Value::Bool(b))),
        Just(Expr::Const(Value::Null)),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 3, |inner| {
        let arith = prop::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]);
        let cmp = prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]);
        prop_oneof![
            (arith, inner.clone(), inner.clone()).prop_map(|(o, l, r)| Expr::Arith(o, l.into(), r.into())),
            (cmp, inner.clone(), inner.clone()).prop_map(|(o, l, r)| Expr::Cmp(o, l.into(), r.into())),
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::Bool(BoolOp::And, v)),
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::Bool(BoolOp::Or, v)),
            inner.clone().prop_map(|e| Expr::Bool(BoolOp::Not, vec![e])),
            (inner.clone(), inner.clone(), inner).prop_map(|(c, t, e)| Expr::If(c.into(), t.into(), e.into())),
        ]
    })
}

/// The query with one subplan consumed twice and a flagged node.
fn shared(q: &QueryGraph) -> QueryGraph {
    let root = q.root().clone();
    let flagged = Node::with_new_flags(&root, NodeFlags { materialize: true, keep: false });
    let u = Node::union(flagged.clone(), flagged).unwrap();
    QueryGraph::new(Node::dup_elim(u).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn expressions_round_trip(e in expr()) {
        let text = print_expr(&e);
        prop_assert_eq!(parse_expr(&text).unwrap(), e, "{}", text);
    }

    #[test]
    fn plans_round_trip(seed in any::<u64>()) {
        let q = random_query(&mut rng(seed), Ops::all(8));
        for g in [q.clone(), shared(&q)] {
            let text = print_plan(&g);
            let back = parse_plan(&text, &catalog()).unwrap();
            prop_assert!(back.structurally_eq(&g), "{}", text);
            prop_assert_eq!(back.node_count(), g.node_count());
            prop_assert_eq!(print_plan(&back), text);
        }
    }
}

#[test]
fn relation_schema_comes_from_the_catalog() {
    let g = parse_plan("(select (> b 1) (rel R)) ; comment", &catalog()).unwrap();
    assert_eq!(g.schema().names(), &["a", "b"]);
    assert!(parse_plan("(rel Nope)", &catalog()).is_err());
    assert!(parse_plan("", &catalog()).is_err());
}

#[test]
fn let_bindings_share_nodes() {
    let text = "(let ((s (select (= a 1) (rel R)))) (union (ref s) (ref s)))";
    let g = parse_plan(text, &catalog()).unwrap();
    assert_eq!(g.node_count(), 3);
    assert!(matches!(g.root().op(), Operator::Union));
    assert!(std::sync::Arc::ptr_eq(g.root().input(0), g.root().input(1)));
}
