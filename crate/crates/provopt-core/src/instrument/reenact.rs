use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::InstrumentError;
use crate::algebra::{attr, lit, Expr, Node, NodeRef, ProjItem, QueryGraph, Schema};

/// `UPDATE relation SET attr = expr, ... WHERE condition`.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub relation: String,
    pub set: Vec<(String, Expr)>,
    pub condition: Expr,
}

impl Update {
    pub fn new(relation: impl Into<String>, set: Vec<(String, Expr)>, condition: Expr) -> Self {
        Update {
            relation: relation.into(),
            set,
            condition,
        }
    }

    fn check(&self, schema: &Schema) -> Result<(), InstrumentError> {
        let unknown = |a: &str| InstrumentError::UnknownAttribute {
            relation: self.relation.clone(),
            attr: a.into(),
        };
        for (a, e) in &self.set {
            if !schema.contains(a) {
                return Err(unknown(a));
            }
            if let Some(c) = e.columns().into_iter().find(|c| !schema.contains(c)) {
                return Err(unknown(&c));
            }
        }
        if let Some(c) = self
            .condition
            .columns()
            .into_iter()
            .find(|c| !schema.contains(c))
        {
            return Err(unknown(&c));
        }
        Ok(())
    }

    /// Projection items of this update: `a -> if θ then e else a` for set
    /// attributes, pass-through otherwise.
    pub fn items(&self, schema: &Schema) -> Vec<ProjItem> {
        schema
            .iter()
            .map(|a| match self.set.iter().find(|(s, _)| s == a) {
                Some((_, e)) => ProjItem::new(
                    Expr::if_then_else(self.condition.clone(), e.clone(), attr(a.clone())),
                    a.clone(),
                ),
                None => ProjItem::keep(a.clone()),
            })
            .collect()
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UPDATE {} SET ", self.relation)?;
        for (i, (a, e)) in self.set.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a} = {e}")?;
        }
        write!(f, " WHERE {}", self.condition)
    }
}

fn relation_of(updates: &[Update]) -> Result<Option<&str>, InstrumentError> {
    let mut name: Option<&str> = None;
    for u in updates {
        match name {
            None => name = Some(&u.relation),
            Some(n) if n != u.relation => {
                return Err(InstrumentError::MixedRelations(
                    n.into(),
                    u.relation.clone(),
                ))
            }
            Some(_) => {}
        }
    }
    Ok(name)
}

/// Stack one projection per update on top of `input`, first update
/// innermost. Evaluated over the state before the updates, the result is
/// the state after them.
pub fn reenact(input: NodeRef, updates: &[Update]) -> Result<NodeRef, InstrumentError> {
    relation_of(updates)?;
    let mut cur = input;
    for u in updates {
        u.check(cur.schema())?;
        let items = u.items(cur.schema());
        cur = Node::project(items, cur)?;
    }
    Ok(cur)
}

/// Reenactment graph over the base relation `name` with `schema`.
pub fn reenact_relation(
    name: &str,
    schema: Schema,
    updates: &[Update],
) -> Result<QueryGraph, InstrumentError> {
    if let Some(r) = relation_of(updates)? {
        if r != name {
            return Err(InstrumentError::MixedRelations(name.into(), r.into()));
        }
    }
    Ok(QueryGraph::new(reenact(
        Node::relation(name, schema),
        updates,
    )?))
}

/// Condition, over the state before the transaction, under which update
/// `i` modifies a row: its own condition with every attribute replaced by
/// the value the earlier updates leave in it.
pub fn touched_conditions(
    schema: &Schema,
    updates: &[Update],
) -> Result<Vec<Expr>, InstrumentError> {
    let mut state: BTreeMap<String, Expr> = schema
        .iter()
        .map(|a| (a.clone(), attr(a.clone())))
        .collect();
    let mut out = Vec::with_capacity(updates.len());
    for u in updates {
        u.check(schema)?;
        let cond = u.condition.substitute(&state);
        let mut next = state.clone();
        for (a, e) in &u.set {
            next.insert(
                a.clone(),
                Expr::if_then_else(cond.clone(), e.substitute(&state), state[a].clone()),
            );
        }
        out.push(cond);
        state = next;
    }
    Ok(out)
}

/// Restrict to rows some update modifies: `σ_{θ1' ∨ ... ∨ θn'}(input)`.
pub fn filter_updated(input: NodeRef, updates: &[Update]) -> Result<NodeRef, InstrumentError> {
    let conds = touched_conditions(input.schema(), updates)?;
    let cond = match conds.len() {
        0 => lit(false),
        1 => conds.into_iter().next().unwrap(),
        _ => Expr::or(conds),
    };
    Ok(Node::select(cond, input)?)
}

/// Name of the relation holding the commit version of `relation` with its
/// last-updater column.
pub fn commit_relation(relation: &str) -> String {
    format!("{relation}__commit")
}

pub const LAST_TXN_ATTR: &str = "last_txn";

/// Restrict `start` to the rows transaction `txn` modified by joining on
/// `key` with the commit version's rows last written by `txn`.
pub fn hist_join(
    start: NodeRef,
    relation: &str,
    key: &[String],
    txn: u64,
) -> Result<NodeRef, InstrumentError> {
    if key.is_empty() {
        return Err(InstrumentError::MissingKey(relation.into()));
    }
    let schema = start.schema().clone();
    if schema.contains(LAST_TXN_ATTR) {
        return Err(InstrumentError::SchemaCollision(LAST_TXN_ATTR.into()));
    }
    let mut commit_names = schema.names().to_vec();
    commit_names.push(LAST_TXN_ATTR.into());
    let commit = Node::relation(commit_relation(relation), Schema::new(commit_names)?);
    let mine = Node::select(attr(LAST_TXN_ATTR).eq(lit(txn as i64)), commit)?;
    let renamed: Vec<String> = key.iter().map(|k| format!("{k}__commit")).collect();
    let items = key
        .iter()
        .zip(&renamed)
        .map(|(k, r)| ProjItem::new(attr(k.clone()), r.clone()))
        .collect();
    let keys = Node::project(items, mine)?;
    let on = key.iter().cloned().zip(renamed).collect();
    let joined = Node::join(on, start, keys)?;
    Ok(Node::project_attrs(schema.names(), joined)?)
}
