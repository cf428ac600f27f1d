use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{BagRelation, Database, ExecError};
use crate::algebra::{
    AggFunc, AlgebraError, Frame, NodeId, NodeRef, Operator, QueryGraph, Schema, Tuple, Value,
};

/// Evaluate the graph over `db` under bag semantics.
pub fn evaluate(graph: &QueryGraph, db: &Database) -> Result<BagRelation, ExecError> {
    let mut all = evaluate_nodes(graph, db)?;
    Ok(all.remove(&graph.root().id()).expect("root evaluated"))
}

/// Results for every node of the graph; shared nodes are evaluated once.
pub fn evaluate_nodes(
    graph: &QueryGraph,
    db: &Database,
) -> Result<BTreeMap<NodeId, BagRelation>, ExecError> {
    let mut memo: BTreeMap<NodeId, BagRelation> = BTreeMap::new();
    for node in graph.topo_order() {
        let inputs: Vec<&BagRelation> = node.inputs().iter().map(|c| &memo[&c.id()]).collect();
        let out = eval_node(&node, &inputs, db)?;
        memo.insert(node.id(), out);
    }
    Ok(memo)
}

pub(crate) fn base_relation(
    name: &str,
    schema: &Schema,
    db: &Database,
) -> Result<BagRelation, ExecError> {
    let rel = db
        .get(name)
        .ok_or_else(|| AlgebraError::UnknownRelation(name.into()))?;
    if rel.schema().len() != schema.len() {
        return Err(ExecError::SchemaMismatch {
            relation: name.into(),
        });
    }
    Ok(rel.clone().with_schema(schema.clone()))
}

fn eval_node(
    node: &NodeRef,
    inputs: &[&BagRelation],
    db: &Database,
) -> Result<BagRelation, ExecError> {
    let schema = node.schema().clone();
    let mut out = BagRelation::new(schema.clone());
    match node.op() {
        Operator::Relation { name, schema } => return base_relation(name, schema, db),
        Operator::Select(cond) => {
            let s = inputs[0].schema();
            for (t, m) in inputs[0].iter() {
                if cond.holds(s, t)? {
                    out.insert(t.clone(), *m);
                }
            }
        }
        Operator::Project(items) => {
            let s = inputs[0].schema();
            for (t, m) in inputs[0].iter() {
                let mut row = Vec::with_capacity(items.len());
                for it in items {
                    row.push(it.expr.eval(s, t)?);
                }
                out.insert(row, *m);
            }
        }
        Operator::Join(on) => {
            let (l, r) = (inputs[0], inputs[1]);
            let pairs: Vec<(usize, usize)> = on
                .iter()
                .map(|(a, b)| {
                    (
                        l.schema().index_of(a).unwrap(),
                        r.schema().index_of(b).unwrap(),
                    )
                })
                .collect();
            let mut buckets: BTreeMap<Tuple, Vec<(&Tuple, u64)>> = BTreeMap::new();
            for (rt, rm) in r.iter() {
                if let Some(k) = join_key(pairs.iter().map(|&(_, j)| &rt[j])) {
                    buckets.entry(k).or_default().push((rt, *rm));
                }
            }
            for (lt, lm) in l.iter() {
                let Some(k) = join_key(pairs.iter().map(|&(i, _)| &lt[i])) else {
                    continue;
                };
                for (rt, rm) in buckets.get(&k).into_iter().flatten() {
                    if pairs.iter().all(|&(i, j)| lt[i].sql_eq(&rt[j])) {
                        out.insert(concat(lt, rt), lm * rm);
                    }
                }
            }
        }
        Operator::Cross => {
            for (lt, lm) in inputs[0].iter() {
                for (rt, rm) in inputs[1].iter() {
                    out.insert(concat(lt, rt), lm * rm);
                }
            }
        }
        Operator::Union => {
            for rel in inputs {
                for (t, m) in rel.iter() {
                    out.insert(t.clone(), *m);
                }
            }
        }
        Operator::Intersect => {
            for (t, m) in inputs[0].iter() {
                out.insert(t.clone(), (*m).min(inputs[1].multiplicity(t)));
            }
        }
        Operator::Diff => {
            for (t, m) in inputs[0].iter() {
                out.insert(t.clone(), m.saturating_sub(inputs[1].multiplicity(t)));
            }
        }
        Operator::Agg { group_by, aggs } => {
            let s = inputs[0].schema();
            let gidx: Vec<usize> = group_by.iter().map(|g| s.index_of(g).unwrap()).collect();
            let groups = group_rows(inputs[0].iter().map(|(t, m)| (t, *m)), &gidx);
            if groups.is_empty() && group_by.is_empty() {
                let mut row = Vec::new();
                for a in aggs {
                    row.push(aggregate(a.func, core::iter::empty())?);
                }
                out.insert(row, 1);
            }
            for (key, members) in groups {
                let mut row = key;
                for a in aggs {
                    let ai = s.index_of(&a.arg).unwrap();
                    row.push(aggregate(
                        a.func,
                        members.iter().map(|(t, m)| (&t[ai], *m)),
                    )?);
                }
                out.insert(row, 1);
            }
        }
        Operator::DupElim => return Ok(inputs[0].dedup()),
        Operator::Window {
            call,
            partition_by,
            order_by,
            frame,
        } => {
            let s = inputs[0].schema();
            let pidx: Vec<usize> = partition_by
                .iter()
                .map(|g| s.index_of(g).unwrap())
                .collect();
            let oidx: Vec<usize> = order_by.iter().map(|g| s.index_of(g).unwrap()).collect();
            let ai = s.index_of(&call.arg).unwrap();
            for (_, members) in group_rows(inputs[0].iter().map(|(t, m)| (t, *m)), &pidx) {
                for (t, m, v) in window_values(call.func, *frame, &members, &oidx, ai)? {
                    let mut row = t.clone();
                    row.push(v);
                    out.insert(row, m);
                }
            }
        }
    }
    Ok(out)
}

/// Bucketing key for equi-joins: numbers are normalized so that values
/// equal after coercion land in the same bucket. Null never joins.
fn join_key<'a, I: Iterator<Item = &'a Value>>(vals: I) -> Option<Tuple> {
    vals.map(|v| match v {
        Value::Null => None,
        Value::Int(i) => Some(Value::Float(*i as f64)),
        Value::Float(f) if *f == 0.0 => Some(Value::Float(0.0)),
        other => Some(other.clone()),
    })
    .collect()
}

pub(crate) fn concat(l: &[Value], r: &[Value]) -> Tuple {
    let mut t = Vec::with_capacity(l.len() + r.len());
    t.extend_from_slice(l);
    t.extend_from_slice(r);
    t
}

/// Partition weighted rows by the values at `idx`.
pub(crate) fn group_rows<'a, I>(rows: I, idx: &[usize]) -> BTreeMap<Tuple, Vec<(&'a Tuple, u64)>>
where
    I: Iterator<Item = (&'a Tuple, u64)>,
{
    let mut groups: BTreeMap<Tuple, Vec<(&'a Tuple, u64)>> = BTreeMap::new();
    for (t, m) in rows {
        let key: Tuple = idx.iter().map(|&i| t[i].clone()).collect();
        groups.entry(key).or_default().push((t, m));
    }
    groups
}

/// Total order used for window ordering: coerced comparison where defined,
/// structural order otherwise.
pub(crate) fn order_cmp(a: &[Value], b: &[Value]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.sql_cmp(y).unwrap_or_else(|| x.cmp(y));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Window function values for one partition: each member paired with the
/// aggregate over its frame.
pub(crate) fn window_values<'a>(
    func: AggFunc,
    frame: Frame,
    members: &[(&'a Tuple, u64)],
    order_idx: &[usize],
    arg_idx: usize,
) -> Result<Vec<(&'a Tuple, u64, Value)>, AlgebraError> {
    let mut out = Vec::with_capacity(members.len());
    if frame == Frame::Whole || order_idx.is_empty() {
        let v = aggregate(func, members.iter().map(|(t, m)| (&t[arg_idx], *m)))?;
        for (t, m) in members {
            out.push((*t, *m, v.clone()));
        }
        return Ok(out);
    }
    let key = |t: &Tuple| -> Tuple { order_idx.iter().map(|&i| t[i].clone()).collect() };
    let mut sorted: Vec<(&Tuple, u64, Tuple)> =
        members.iter().map(|(t, m)| (*t, *m, key(t))).collect();
    sorted.sort_by(|a, b| order_cmp(&a.2, &b.2));
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && order_cmp(&sorted[start].2, &sorted[end].2) == Ordering::Equal {
            end += 1;
        }
        let v = aggregate(
            func,
            sorted[..end].iter().map(|(t, m, _)| (&t[arg_idx], *m)),
        )?;
        for (t, m, _) in &sorted[start..end] {
            out.push((*t, *m, v.clone()));
        }
        start = end;
    }
    Ok(out)
}

/// Aggregate weighted values. Nulls are skipped; `count` of nothing is 0,
/// `sum`/`min`/`max` of nothing is null and `avg` over an empty input is an
/// error.
pub fn aggregate<'a, I>(func: AggFunc, values: I) -> Result<Value, AlgebraError>
where
    I: Iterator<Item = (&'a Value, u64)>,
{
    let mut seen_rows = false;
    let mut count: u64 = 0;
    let mut int_sum: Option<i64> = Some(0);
    let mut float_sum = 0.0f64;
    let mut any_float = false;
    let mut best: Option<&Value> = None;
    for (v, m) in values {
        seen_rows = true;
        if v.is_null() || m == 0 {
            continue;
        }
        count += m;
        match func {
            AggFunc::Sum | AggFunc::Avg => match v {
                Value::Int(i) => {
                    let add = i.checked_mul(m as i64).ok_or(AlgebraError::Overflow);
                    int_sum = match (int_sum, add) {
                        (Some(s), Ok(a)) => s.checked_add(a),
                        _ => None,
                    };
                    float_sum += (*i as f64) * (m as f64);
                }
                Value::Float(f) => {
                    any_float = true;
                    float_sum += f * (m as f64);
                }
                other => {
                    return Err(AlgebraError::Type(alloc::format!(
                        "cannot {} {} values",
                        func.name(),
                        other.type_name()
                    )))
                }
            },
            AggFunc::Min | AggFunc::Max => {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let o = v.sql_cmp(b).ok_or_else(|| {
                            AlgebraError::Type(alloc::format!(
                                "cannot compare {} with {}",
                                v.type_name(),
                                b.type_name()
                            ))
                        })?;
                        let better = if func == AggFunc::Min {
                            o == Ordering::Less
                        } else {
                            o == Ordering::Greater
                        };
                        if better {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            AggFunc::Count => {}
        }
    }
    Ok(match func {
        AggFunc::Count => Value::Int(count as i64),
        AggFunc::Min | AggFunc::Max => best.cloned().unwrap_or(Value::Null),
        AggFunc::Sum if count == 0 => Value::Null,
        AggFunc::Sum if any_float => Value::Float(float_sum),
        AggFunc::Sum => Value::Int(int_sum.ok_or(AlgebraError::Overflow)?),
        AggFunc::Avg if !seen_rows => return Err(AlgebraError::EmptyAverage),
        AggFunc::Avg if count == 0 => Value::Null,
        AggFunc::Avg => Value::Float(float_sum / count as f64),
    })
}
