//! Provenance-polynomial semantics and its relational encoding.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::eval::{aggregate, base_relation, concat, group_rows};
use super::{BagRelation, Database, ExecError};
use crate::algebra::{NodeRef, Operator, QueryGraph, Schema, Tuple, Value};

/// One base relation access in a query, numbered per relation name in
/// left-to-right depth-first order of the query tree (shared subplans are
/// unfolded, so every path gets its own occurrence).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvLeaf {
    pub relation: String,
    pub occurrence: usize,
    pub schema: Schema,
}

impl ProvLeaf {
    /// SQL-safe name of the provenance attribute copying `attr`.
    pub fn attr_name(&self, attr: &str) -> String {
        prov_attr_name(&self.relation, self.occurrence, attr)
    }

    pub fn attr_names(&self) -> Vec<String> {
        self.schema.iter().map(|a| self.attr_name(a)).collect()
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// `prov_<rel>_<occ>_<attr>`.
pub fn prov_attr_name(relation: &str, occurrence: usize, attr: &str) -> String {
    format!(
        "prov_{}_{}_{}",
        sanitize(relation),
        occurrence,
        sanitize(attr)
    )
}

pub fn is_prov_attr(name: &str) -> bool {
    name.starts_with("prov_")
}

/// Leaves of the unfolded query tree in depth-first, left-to-right order.
pub fn prov_leaves(graph: &QueryGraph) -> Vec<ProvLeaf> {
    fn walk(n: &NodeRef, counts: &mut BTreeMap<String, usize>, out: &mut Vec<ProvLeaf>) {
        if let Operator::Relation { name, schema } = n.op() {
            let c = counts.entry(name.clone()).or_insert(0);
            out.push(ProvLeaf {
                relation: name.clone(),
                occurrence: *c,
                schema: schema.clone(),
            });
            *c += 1;
        }
        for i in n.inputs() {
            walk(i, counts, out);
        }
    }
    let mut out = Vec::new();
    walk(graph.root(), &mut BTreeMap::new(), &mut out);
    out
}

/// Provenance variable: a base tuple read by a given leaf.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProvVar {
    pub leaf: usize,
    pub tuple: Tuple,
}

/// Product of variables, kept sorted.
pub type Monomial = Vec<ProvVar>;

/// Polynomial with natural-number coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Polynomial(BTreeMap<Monomial, u64>);

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn var(v: ProvVar, coeff: u64) -> Self {
        let mut p = Polynomial::zero();
        if coeff > 0 {
            p.0.insert(alloc::vec![v], coeff);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add_assign(&mut self, other: &Polynomial) {
        for (m, c) in &other.0 {
            *self.0.entry(m.clone()).or_insert(0) += c;
        }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                let mut m = m1.clone();
                m.extend(m2.iter().cloned());
                m.sort();
                *out.0.entry(m).or_insert(0) += c1 * c2;
            }
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, u64)> {
        self.0.iter().map(|(m, c)| (m, *c))
    }

    /// Sum of coefficients, i.e. the polynomial with every variable set to 1.
    pub fn weight(&self) -> u64 {
        self.0.values().sum()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if *c != 1 {
                write!(f, "{c}")?;
            }
            for (j, v) in m.iter().enumerate() {
                if j > 0 || *c != 1 {
                    f.write_str("*")?;
                }
                write!(f, "x{}(", v.leaf)?;
                for (k, val) in v.tuple.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{val}")?;
                }
                f.write_str(")")?;
            }
        }
        Ok(())
    }
}

/// Annotated tuple: its bag multiplicity and its provenance polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedRow {
    pub multiplicity: u64,
    pub provenance: Polynomial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedRelation {
    pub schema: Schema,
    pub rows: BTreeMap<Tuple, AnnotatedRow>,
    pub leaves: Vec<ProvLeaf>,
}

impl AnnotatedRelation {
    fn empty(schema: Schema) -> Self {
        AnnotatedRelation {
            schema,
            rows: BTreeMap::new(),
            leaves: Vec::new(),
        }
    }

    fn add(&mut self, t: Tuple, mult: u64, prov: &Polynomial) {
        if mult == 0 {
            return;
        }
        let row = self.rows.entry(t).or_insert_with(|| AnnotatedRow {
            multiplicity: 0,
            provenance: Polynomial::zero(),
        });
        row.multiplicity += mult;
        row.provenance.add_assign(prov);
    }
}

/// Evaluate with provenance annotations. Supported operators: relation,
/// selection, projection, join, cross product, union, aggregation and
/// duplicate elimination (which keeps all derivations).
pub fn evaluate_annotated(
    graph: &QueryGraph,
    db: &Database,
) -> Result<AnnotatedRelation, ExecError> {
    let mut leaf = 0;
    let mut out = eval_ann(graph.root(), db, &mut leaf)?;
    out.leaves = prov_leaves(graph);
    Ok(out)
}

fn eval_ann(
    node: &NodeRef,
    db: &Database,
    leaf: &mut usize,
) -> Result<AnnotatedRelation, ExecError> {
    let mut inputs = Vec::new();
    if let Operator::Relation { name, schema } = node.op() {
        let base = base_relation(name, schema, db)?;
        let id = *leaf;
        *leaf += 1;
        let mut out = AnnotatedRelation::empty(schema.clone());
        for (t, m) in base.iter() {
            out.add(
                t.clone(),
                *m,
                &Polynomial::var(
                    ProvVar {
                        leaf: id,
                        tuple: t.clone(),
                    },
                    *m,
                ),
            );
        }
        return Ok(out);
    }
    for i in node.inputs() {
        inputs.push(eval_ann(i, db, leaf)?);
    }
    let mut out = AnnotatedRelation::empty(node.schema().clone());
    match node.op() {
        Operator::Relation { .. } => unreachable!(),
        Operator::Select(cond) => {
            for (t, r) in &inputs[0].rows {
                if cond.holds(&inputs[0].schema, t)? {
                    out.add(t.clone(), r.multiplicity, &r.provenance);
                }
            }
        }
        Operator::Project(items) => {
            for (t, r) in &inputs[0].rows {
                let mut row = Vec::with_capacity(items.len());
                for it in items {
                    row.push(it.expr.eval(&inputs[0].schema, t)?);
                }
                out.add(row, r.multiplicity, &r.provenance);
            }
        }
        Operator::Join(_) | Operator::Cross => {
            let pairs: Vec<(usize, usize)> = match node.op() {
                Operator::Join(on) => on
                    .iter()
                    .map(|(a, b)| {
                        (
                            inputs[0].schema.index_of(a).unwrap(),
                            inputs[1].schema.index_of(b).unwrap(),
                        )
                    })
                    .collect(),
                _ => Vec::new(),
            };
            for (lt, lr) in &inputs[0].rows {
                for (rt, rr) in &inputs[1].rows {
                    if pairs.iter().all(|&(i, j)| lt[i].sql_eq(&rt[j])) {
                        out.add(
                            concat(lt, rt),
                            lr.multiplicity * rr.multiplicity,
                            &lr.provenance.mul(&rr.provenance),
                        );
                    }
                }
            }
        }
        Operator::Union => {
            for rel in &inputs {
                for (t, r) in &rel.rows {
                    out.add(t.clone(), r.multiplicity, &r.provenance);
                }
            }
        }
        Operator::DupElim => {
            for (t, r) in &inputs[0].rows {
                out.add(t.clone(), 1, &r.provenance);
            }
        }
        Operator::Agg { group_by, aggs } => {
            let s = &inputs[0].schema;
            let gidx: Vec<usize> = group_by.iter().map(|g| s.index_of(g).unwrap()).collect();
            let weighted: BTreeMap<&Tuple, &AnnotatedRow> = inputs[0].rows.iter().collect();
            let groups = group_rows(weighted.iter().map(|(t, r)| (*t, r.multiplicity)), &gidx);
            if groups.is_empty() && group_by.is_empty() {
                let mut row = Vec::new();
                for a in aggs {
                    row.push(aggregate(a.func, core::iter::empty())?);
                }
                out.rows.insert(
                    row,
                    AnnotatedRow {
                        multiplicity: 1,
                        provenance: Polynomial::zero(),
                    },
                );
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
                let mut prov = Polynomial::zero();
                for (t, _) in &members {
                    prov.add_assign(&weighted[t].provenance);
                }
                out.add(row, 1, &prov);
            }
        }
        Operator::Intersect | Operator::Diff | Operator::Window { .. } => {
            return Err(ExecError::Unsupported(node.op().kind()));
        }
    }
    Ok(out)
}

/// Relational encoding: one row per monomial, the tuple followed by the
/// values of each leaf's variable (nulls when the monomial has none from
/// that leaf), with the coefficient as multiplicity.
pub fn encode_provenance(ann: &AnnotatedRelation) -> Result<BagRelation, ExecError> {
    let mut names = ann.schema.names().to_vec();
    for l in &ann.leaves {
        names.extend(l.attr_names());
    }
    let schema = Schema::new(names)?;
    let mut out = BagRelation::new(schema);
    for (t, r) in &ann.rows {
        for (m, c) in r.provenance.terms() {
            let mut row = t.clone();
            for (i, l) in ann.leaves.iter().enumerate() {
                let mut vars = m.iter().filter(|v| v.leaf == i);
                match (vars.next(), vars.next()) {
                    (Some(v), None) => row.extend(v.tuple.iter().cloned()),
                    (None, _) => row.extend(core::iter::repeat_n(Value::Null, l.schema.len())),
                    (Some(_), Some(_)) => {
                        return Err(ExecError::Unsupported("repeated leaf in monomial"))
                    }
                }
            }
            out.insert(row, c);
        }
    }
    Ok(out)
}
