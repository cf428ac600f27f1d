//! Cardinality estimation and plan cost.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{Database, ExecError};
use crate::algebra::{AlgebraError, BoolOp, CmpOp, Expr, NodeId, NodeRef, Operator, QueryGraph};

/// Row count and per-attribute distinct counts of a base relation, by
/// attribute position.
#[derive(Debug, Clone, PartialEq)]
pub struct RelStats {
    pub rows: f64,
    pub distinct: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Statistics {
    relations: BTreeMap<String, RelStats>,
}

impl Statistics {
    pub fn new() -> Self {
        Statistics::default()
    }

    pub fn insert(&mut self, relation: impl Into<String>, stats: RelStats) {
        self.relations.insert(relation.into(), stats);
    }

    pub fn get(&self, relation: &str) -> Option<&RelStats> {
        self.relations.get(relation)
    }

    /// Exact statistics of a concrete database.
    pub fn from_database(db: &Database) -> Self {
        let mut s = Statistics::new();
        for (name, rel) in db.iter() {
            let mut sets: Vec<BTreeSet<&crate::algebra::Value>> =
                (0..rel.schema().len()).map(|_| BTreeSet::new()).collect();
            for (t, _) in rel.iter() {
                for (i, v) in t.iter().enumerate() {
                    sets[i].insert(v);
                }
            }
            s.insert(
                name.clone(),
                RelStats {
                    rows: rel.total() as f64,
                    distinct: sets.iter().map(|x| x.len() as f64).collect(),
                },
            );
        }
        s
    }
}

/// Per-unit weights of the cost formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Charged per input row.
    pub cpu: f64,
    /// Charged per output row.
    pub build: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            cpu: 1.0,
            build: 2.0,
        }
    }
}

/// Estimated output of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub rows: f64,
    pub distinct: BTreeMap<String, f64>,
}

impl Estimate {
    fn d(&self, attr: &str) -> f64 {
        self.distinct
            .get(attr)
            .copied()
            .unwrap_or(self.rows)
            .max(1.0)
    }

    fn capped(mut self) -> Self {
        let rows = self.rows;
        for v in self.distinct.values_mut() {
            *v = v.min(rows).max(if rows > 0.0 { 1.0 } else { 0.0 });
        }
        self
    }
}

const RANGE_SELECTIVITY: f64 = 1.0 / 3.0;

fn selectivity(e: &Expr, input: &Estimate) -> f64 {
    match e {
        Expr::Cmp(CmpOp::Eq, l, r) => match (l.as_ref(), r.as_ref()) {
            (Expr::Attr(a), Expr::Attr(b)) => 1.0 / input.d(a).max(input.d(b)),
            (Expr::Attr(a), Expr::Const(_)) | (Expr::Const(_), Expr::Attr(a)) => 1.0 / input.d(a),
            _ => RANGE_SELECTIVITY,
        },
        Expr::Bool(BoolOp::And, ops) => ops.iter().map(|o| selectivity(o, input)).product(),
        Expr::Bool(BoolOp::Or, ops) => {
            1.0 - ops
                .iter()
                .map(|o| 1.0 - selectivity(o, input))
                .product::<f64>()
        }
        Expr::Bool(BoolOp::Not, ops) => 1.0 - selectivity(&ops[0], input),
        Expr::Const(crate::algebra::Value::Bool(true)) => 1.0,
        _ => RANGE_SELECTIVITY,
    }
}

fn estimate_node(
    node: &NodeRef,
    inputs: &[&Estimate],
    stats: &Statistics,
) -> Result<Estimate, ExecError> {
    let schema = node.schema();
    let est = match node.op() {
        Operator::Relation { name, .. } => {
            let st = stats
                .get(name)
                .ok_or_else(|| AlgebraError::UnknownRelation(name.clone()))?;
            Estimate {
                rows: st.rows,
                distinct: schema
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.clone(), st.distinct.get(i).copied().unwrap_or(st.rows)))
                    .collect(),
            }
        }
        Operator::Select(cond) => {
            let input = inputs[0];
            let mut out = Estimate {
                rows: input.rows * selectivity(cond, input),
                distinct: input.distinct.clone(),
            };
            for c in cond.conjuncts() {
                if let Expr::Cmp(CmpOp::Eq, l, r) = &c {
                    match (l.as_ref(), r.as_ref()) {
                        (Expr::Attr(a), Expr::Const(_)) | (Expr::Const(_), Expr::Attr(a)) => {
                            out.distinct.insert(a.clone(), 1.0);
                        }
                        (Expr::Attr(a), Expr::Attr(b)) => {
                            let m = input.d(a).min(input.d(b));
                            out.distinct.insert(a.clone(), m);
                            out.distinct.insert(b.clone(), m);
                        }
                        _ => {}
                    }
                }
            }
            out
        }
        Operator::Project(items) => {
            let input = inputs[0];
            let distinct = items
                .iter()
                .map(|it| {
                    let d = match &it.expr {
                        Expr::Attr(a) => input.d(a),
                        Expr::Const(_) => 1.0,
                        e => e
                            .columns()
                            .iter()
                            .map(|c| input.d(c))
                            .product::<f64>()
                            .min(input.rows),
                    };
                    (it.name.clone(), d)
                })
                .collect();
            Estimate {
                rows: input.rows,
                distinct,
            }
        }
        Operator::Join(on) => {
            let (l, r) = (inputs[0], inputs[1]);
            let mut rows = l.rows * r.rows;
            let mut distinct = l.distinct.clone();
            distinct.extend(r.distinct.iter().map(|(k, v)| (k.clone(), *v)));
            for (a, b) in on {
                rows /= l.d(a).max(r.d(b));
                let m = l.d(a).min(r.d(b));
                distinct.insert(a.clone(), m);
                distinct.insert(b.clone(), m);
            }
            Estimate { rows, distinct }
        }
        Operator::Cross => {
            let mut distinct = inputs[0].distinct.clone();
            distinct.extend(inputs[1].distinct.iter().map(|(k, v)| (k.clone(), *v)));
            Estimate {
                rows: inputs[0].rows * inputs[1].rows,
                distinct,
            }
        }
        Operator::Union | Operator::Intersect | Operator::Diff => {
            let (l, r) = (inputs[0], inputs[1]);
            let rows = match node.op() {
                Operator::Union => l.rows + r.rows,
                Operator::Intersect => l.rows.min(r.rows),
                _ => l.rows,
            };
            let rnames: Vec<&String> = node.input(1).schema().iter().collect();
            let distinct = node
                .input(0)
                .schema()
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let d = match node.op() {
                        Operator::Union => l.d(a) + r.d(rnames[i]),
                        _ => l.d(a),
                    };
                    (a.clone(), d)
                })
                .collect();
            Estimate { rows, distinct }
        }
        Operator::Agg { group_by, aggs } => {
            let input = inputs[0];
            let rows = if group_by.is_empty() {
                1.0
            } else {
                group_by
                    .iter()
                    .map(|g| input.d(g))
                    .product::<f64>()
                    .min(input.rows)
            };
            let mut distinct: BTreeMap<String, f64> =
                group_by.iter().map(|g| (g.clone(), input.d(g))).collect();
            for a in aggs {
                distinct.insert(a.out.clone(), rows);
            }
            Estimate { rows, distinct }
        }
        Operator::DupElim => {
            let input = inputs[0];
            let rows = schema
                .iter()
                .map(|a| input.d(a))
                .product::<f64>()
                .min(input.rows);
            Estimate {
                rows,
                distinct: input.distinct.clone(),
            }
        }
        Operator::Window { call, .. } => {
            let input = inputs[0];
            let mut distinct = input.distinct.clone();
            distinct.insert(call.out.clone(), input.rows);
            Estimate {
                rows: input.rows,
                distinct,
            }
        }
    };
    Ok(est.capped())
}

/// Estimates for every node of the graph.
pub fn estimate(
    graph: &QueryGraph,
    stats: &Statistics,
) -> Result<BTreeMap<NodeId, Estimate>, ExecError> {
    let mut memo: BTreeMap<NodeId, Estimate> = BTreeMap::new();
    for n in graph.topo_order() {
        let inputs: Vec<&Estimate> = n.inputs().iter().map(|c| &memo[&c.id()]).collect();
        let e = estimate_node(&n, &inputs, stats)?;
        memo.insert(n.id(), e);
    }
    Ok(memo)
}

fn node_cost(node: &NodeRef, est: &BTreeMap<NodeId, Estimate>, params: CostParams) -> f64 {
    let out = est[&node.id()].rows;
    let input: f64 = match node.op() {
        Operator::Relation { .. } => out,
        _ => node.inputs().iter().map(|c| est[&c.id()].rows).sum(),
    };
    let mut cost = params.cpu * input + params.build * out;
    if matches!(node.op(), Operator::Agg { .. } | Operator::Window { .. }) {
        cost += out * libm::log2(out + 1.0);
    }
    cost
}

/// Estimated cost of the plan; shared nodes are charged once.
pub fn plan_cost(
    graph: &QueryGraph,
    stats: &Statistics,
    params: CostParams,
) -> Result<f64, ExecError> {
    let est = estimate(graph, stats)?;
    Ok(graph
        .topo_order()
        .iter()
        .map(|n| node_cost(n, &est, params))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{attr, lit, AggCall, AggFunc, Node, Schema};
    use alloc::vec;

    fn stats() -> Statistics {
        let mut s = Statistics::new();
        s.insert(
            "R",
            RelStats {
                rows: 1000.0,
                distinct: vec![1000.0, 10.0],
            },
        );
        s.insert(
            "S",
            RelStats {
                rows: 100.0,
                distinct: vec![100.0],
            },
        );
        s
    }

    fn r() -> NodeRef {
        Node::relation("R", Schema::from_names(["a", "b"]).unwrap())
    }

    #[test]
    fn selection_estimates() {
        let g = QueryGraph::new(Node::select(attr("b").eq(lit(3)), r()).unwrap());
        let e = estimate(&g, &stats()).unwrap();
        assert_eq!(e[&g.root().id()].rows, 100.0);
        let g = QueryGraph::new(Node::select(attr("a").lt(lit(3)), r()).unwrap());
        let e = estimate(&g, &stats()).unwrap();
        assert!((e[&g.root().id()].rows - 1000.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn join_and_aggregation_estimates() {
        let s = Node::relation("S", Schema::from_names(["c"]).unwrap());
        let g = QueryGraph::new(Node::join_on("a", "c", r(), s).unwrap());
        let e = estimate(&g, &stats()).unwrap();
        assert_eq!(e[&g.root().id()].rows, 100.0);
        let g = QueryGraph::new(
            Node::agg(
                vec!["b".into()],
                vec![AggCall::new(AggFunc::Sum, "a", "s")],
                r(),
            )
            .unwrap(),
        );
        let e = estimate(&g, &stats()).unwrap();
        assert_eq!(e[&g.root().id()].rows, 10.0);
    }

    #[test]
    fn cost_formula_on_a_scan_and_aggregation() {
        let g = QueryGraph::new(
            Node::agg(
                vec!["b".into()],
                vec![AggCall::new(AggFunc::Sum, "a", "s")],
                r(),
            )
            .unwrap(),
        );
        let c = plan_cost(&g, &stats(), CostParams::default()).unwrap();
        let scan = 1000.0 + 2.0 * 1000.0;
        let agg = 1000.0 + 2.0 * 10.0 + 10.0 * libm::log2(11.0);
        assert!((c - (scan + agg)).abs() < 1e-9);
    }

    #[test]
    fn shared_nodes_are_charged_once() {
        let base = r();
        let shared = QueryGraph::new(Node::union(base.clone(), base).unwrap());
        let unshared = QueryGraph::new(Node::union(r(), r()).unwrap());
        let p = CostParams::default();
        let a = plan_cost(&shared, &stats(), p).unwrap();
        let b = plan_cost(&unshared, &stats(), p).unwrap();
        assert!((b - a - 3000.0).abs() < 1e-9);
    }
}
