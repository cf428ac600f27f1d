//! Synthetic workloads: stacked aggregations and chains of updates.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{attr, lit, AggCall, AggFunc, Node, ProjItem, QueryGraph, Schema, Value};
use crate::executor::{BagRelation, Database};
use crate::instrument::Update;

/// Name of the base relation of [`stacked_aggregation`].
pub const STACKED_RELATION: &str = "facts";

/// `levels` aggregations, each summing the previous one's result over a
/// grouping `fan_in` times coarser. The base relation has attributes
/// `g0, v0`; level `k` outputs `g{k}, v{k}`.
pub fn stacked_aggregation(levels: usize, fan_in: i64) -> QueryGraph {
    let mut n = Node::relation(
        STACKED_RELATION,
        Schema::from_names(["g0", "v0"]).expect("distinct names"),
    );
    for k in 0..levels {
        let (g, v) = (format!("g{k}"), format!("v{k}"));
        let agg = Node::agg(
            alloc::vec![g.clone()],
            alloc::vec![AggCall::new(AggFunc::Sum, v, format!("v{}", k + 1))],
            n,
        )
        .expect("attributes exist");
        n = Node::project(
            alloc::vec![
                ProjItem::new(attr(g).div(lit(fan_in.max(1))), format!("g{}", k + 1)),
                ProjItem::keep(format!("v{}", k + 1))
            ],
            agg,
        )
        .expect("attributes exist");
    }
    QueryGraph::new(n)
}

/// Base data for [`stacked_aggregation`]: `rows` tuples with group ids in
/// `0..groups` and values in `0..100`.
pub fn stacked_data(rows: usize, groups: i64, seed: u64) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema::from_names(["g0", "v0"]).expect("distinct names");
    let tuples: Vec<_> = (0..rows)
        .map(|_| {
            alloc::vec![
                Value::Int(rng.gen_range(0..groups.max(1))),
                Value::Int(rng.gen_range(0..100))
            ]
        })
        .collect();
    let mut db = Database::new();
    db.insert(STACKED_RELATION, BagRelation::from_rows(schema, tuples));
    db
}

/// `depth` updates of `relation`, each reading and writing attribute `a`:
/// the `k`-th adds `k+1` to `a` where `a > k`.
pub fn update_chain(relation: &str, depth: usize) -> Vec<Update> {
    (0..depth as i64)
        .map(|k| {
            Update::new(
                relation,
                alloc::vec![("a".into(), attr("a").add(lit(k + 1)))],
                attr("a").gt(lit(k)),
            )
        })
        .collect()
}
