//! Random queries and instances shared by the integration tests.
#![allow(dead_code)]

use provopt_core::algebra::{
    attr, lit, AggCall, AggFunc, Expr, Frame, Node, NodeRef, Operator, ProjItem, QueryGraph,
    Schema, Value,
};
use provopt_core::executor::{BagRelation, Database};
use provopt_core::properties::BaseKeys;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const RELATIONS: [(&str, [&str; 2]); 3] = [("R", ["a", "b"]), ("S", ["c", "d"]), ("T", ["e", "f"])];

pub fn schema(names: &[&str]) -> Schema {
    Schema::from_names(names.iter().copied()).unwrap()
}

/// `R.a` is a key; `S` and `T` may hold duplicates.
pub fn base_keys() -> BaseKeys {
    let mut k = BaseKeys::new();
    k.insert("R".into(), vec![["a".to_string()].into_iter().collect()]);
    k
}

/// Up to `max_rows` rows per relation, small non-null integers.
pub fn random_db(rng: &mut ChaCha8Rng, max_rows: usize) -> Database {
    let mut db = Database::new();
    for (name, attrs) in RELATIONS {
        let n = rng.gen_range(0..=max_rows);
        let mut keys: Vec<i64> = (0..8).collect();
        keys.shuffle(rng);
        let rows: Vec<Vec<Value>> = (0..n)
            .map(|i| {
                let first = if name == "R" { keys[i % keys.len()] } else { rng.gen_range(0..4) };
                vec![Value::Int(first), Value::Int(rng.gen_range(0..4))]
            })
            .collect();
        db.insert(name, BagRelation::from_rows(schema(&attrs), rows));
    }
    db
}

/// Which operators the generator may emit.
#[derive(Debug, Clone, Copy)]
pub struct Ops {
    pub max_ops: usize,
    pub set_ops: bool,
    pub windows: bool,
    pub aggs: bool,
}

impl Ops {
    /// Everything the executor supports.
    pub fn all(max_ops: usize) -> Self {
        Ops { max_ops, set_ops: true, windows: true, aggs: true }
    }

    /// Operators the provenance instrumentation accepts.
    pub fn instrumentable(max_ops: usize) -> Self {
        Ops { max_ops, set_ops: false, windows: false, aggs: true }
    }
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    ops: Ops,
    fresh: usize,
}

pub fn operator_count(g: &QueryGraph) -> usize {
    g.topo_order().iter().filter(|n| !matches!(n.op(), Operator::Relation { .. })).count()
}

pub fn agg_count(g: &QueryGraph) -> usize {
    g.topo_order().iter().filter(|n| matches!(n.op(), Operator::Agg { .. })).count()
}

/// A random query with at most `ops.max_ops` operators.
pub fn random_query(rng: &mut ChaCha8Rng, ops: Ops) -> QueryGraph {
    loop {
        let budget = rng.gen_range(1..=ops.max_ops);
        let mut g = Gen { rng, ops, fresh: 0 };
        let root = g.plan(budget);
        let q = QueryGraph::new(root);
        if operator_count(&q) <= ops.max_ops {
            return q;
        }
    }
}

/// A random instrumentable query with between `lo` and `hi` aggregations.
pub fn random_agg_query(rng: &mut ChaCha8Rng, max_ops: usize, lo: usize, hi: usize) -> QueryGraph {
    loop {
        let q = random_query(rng, Ops::instrumentable(max_ops));
        let n = agg_count(&q);
        if (lo..=hi).contains(&n) {
            return q;
        }
    }
}

impl Gen<'_> {
    fn fresh(&mut self) -> String {
        self.fresh += 1;
        format!("x{}", self.fresh)
    }

    fn leaf(&mut self) -> NodeRef {
        let (name, attrs) = RELATIONS[self.rng.gen_range(0..RELATIONS.len())];
        Node::relation(name, schema(&attrs))
    }

    fn pick(&mut self, names: &[String]) -> String {
        names[self.rng.gen_range(0..names.len())].clone()
    }

    fn subset(&mut self, names: &[String], min: usize) -> Vec<String> {
        loop {
            let s: Vec<String> = names.iter().filter(|_| self.rng.gen_bool(0.5)).cloned().collect();
            if s.len() >= min {
                return s;
            }
        }
    }

    fn atom(&mut self, names: &[String]) -> Expr {
        let a = attr(self.pick(names));
        let rhs = if self.rng.gen_bool(0.3) { attr(self.pick(names)) } else { lit(self.rng.gen_range(0..4i64)) };
        match self.rng.gen_range(0..5) {
            0 | 1 => a.eq(rhs),
            2 => a.lt(rhs),
            3 => a.ge(rhs),
            _ => a.ne(rhs),
        }
    }

    fn condition(&mut self, names: &[String]) -> Expr {
        match self.rng.gen_range(0..6) {
            0 => Expr::and(vec![self.atom(names), self.atom(names)]),
            1 => Expr::or(vec![self.atom(names), self.atom(names)]),
            2 => Expr::not(self.atom(names)),
            _ => self.atom(names),
        }
    }

    fn plan(&mut self, budget: usize) -> NodeRef {
        if budget == 0 {
            return self.leaf();
        }
        let binary = budget >= 2 && self.rng.gen_bool(0.4);
        if binary {
            let left_budget = self.rng.gen_range(0..budget);
            let l = self.plan(left_budget);
            let r = self.plan(budget - 1 - left_budget);
            return self.binary(l, r);
        }
        let input = self.plan(budget - 1);
        self.unary(input)
    }

    fn binary(&mut self, l: NodeRef, r: NodeRef) -> NodeRef {
        let kinds = if self.ops.set_ops { 5 } else { 3 };
        match self.rng.gen_range(0..kinds) {
            0 => {
                let on = vec![(self.pick(l.schema().names()), self.pick(r.schema().names()))];
                Node::join_disambiguated(on, l, r).unwrap()
            }
            1 => Node::cross_disambiguated(l, r).unwrap(),
            k => {
                let arity = l.schema().len().min(r.schema().len());
                let l = narrow(l, arity);
                let r = narrow(r, arity);
                match k {
                    2 => Node::union(l, r),
                    3 => Node::intersect(l, r),
                    _ => Node::diff(l, r),
                }
                .unwrap()
            }
        }
    }

    fn unary(&mut self, input: NodeRef) -> NodeRef {
        let names = input.schema().names().to_vec();
        let kinds = 3 + usize::from(self.ops.aggs) + usize::from(self.ops.windows);
        let mut k = self.rng.gen_range(0..kinds);
        if !self.ops.aggs && k >= 3 {
            k += 1;
        }
        match k {
            0 => {
                let c = self.condition(&names);
                Node::select(c, input).unwrap()
            }
            1 => {
                let mut items: Vec<ProjItem> =
                    self.subset(&names, 1).into_iter().map(ProjItem::keep).collect();
                if self.rng.gen_bool(0.4) {
                    let e = match self.rng.gen_range(0..3) {
                        0 => attr(self.pick(&names)).add(attr(self.pick(&names))),
                        1 => attr(self.pick(&names)).sub(lit(1)),
                        _ => {
                            let c = self.atom(&names);
                            Expr::if_then_else(c, attr(self.pick(&names)), lit(0))
                        }
                    };
                    let name = self.fresh();
                    items.push(ProjItem::new(e, name));
                }
                Node::project(items, input).unwrap()
            }
            2 => Node::dup_elim(input).unwrap(),
            3 => {
                let group_by = self.subset(&names, 0);
                let n = self.rng.gen_range(1..=2);
                let aggs = (0..n)
                    .map(|_| {
                        let f = [AggFunc::Sum, AggFunc::Count, AggFunc::Min, AggFunc::Max][self.rng.gen_range(0..4)];
                        AggCall::new(f, self.pick(&names), self.fresh())
                    })
                    .collect();
                Node::agg(group_by, aggs, input).unwrap()
            }
            _ => {
                let f = [AggFunc::Sum, AggFunc::Count, AggFunc::Min, AggFunc::Max][self.rng.gen_range(0..4)];
                let call = AggCall::new(f, self.pick(&names), self.fresh());
                let partition = self.subset(&names, 0);
                let order = self.subset(&names, 0);
                let frame = if self.rng.gen_bool(0.5) { Frame::Running } else { Frame::Whole };
                Node::window(call, partition, order, frame, input).unwrap()
            }
        }
    }
}

/// Projection on the first `arity` attributes, or the input itself.
fn narrow(n: NodeRef, arity: usize) -> NodeRef {
    if n.schema().len() == arity {
        return n;
    }
    let names: Vec<String> = n.schema().names()[..arity].to_vec();
    Node::project_attrs(&names, n).unwrap()
}
