use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::reenact::{commit_relation, filter_updated, hist_join, reenact, Update, LAST_TXN_ATTR};
use super::InstrumentError;
use crate::algebra::{Node, QueryGraph, Schema, Tuple, Value};
use crate::executor::{BagRelation, Database};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TxnId(pub u64);

/// How reenactment is restricted to the rows a transaction modified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeMethod {
    /// Select rows satisfying the disjunction of the update conditions.
    FilterUpdated,
    /// Join with the commit version's rows last written by the transaction.
    HistJoin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredRow {
    pub values: Tuple,
    pub last_txn: Option<TxnId>,
}

#[derive(Debug, Clone)]
struct Table {
    schema: Schema,
    key: Vec<String>,
    rows: Vec<StoredRow>,
}

/// Versions of one relation around a committed transaction.
#[derive(Debug, Clone)]
pub struct TxnRecord {
    pub id: TxnId,
    pub relation: String,
    pub updates: Vec<Update>,
    start: Vec<StoredRow>,
    commit: Vec<StoredRow>,
}

/// In-memory relations with per-transaction start and commit versions and
/// the last transaction that wrote each row.
#[derive(Debug, Clone, Default)]
pub struct VersionedStore {
    tables: BTreeMap<String, Table>,
    history: Vec<TxnRecord>,
}

fn to_bag(schema: &Schema, rows: &[StoredRow]) -> BagRelation {
    BagRelation::from_rows(schema.clone(), rows.iter().map(|r| r.values.clone()))
}

impl VersionedStore {
    pub fn new() -> Self {
        VersionedStore::default()
    }

    /// Register a relation. `key` may be empty; scoping by history join then
    /// fails for it.
    pub fn create<I>(
        &mut self,
        name: impl Into<String>,
        schema: Schema,
        key: Vec<String>,
        rows: I,
    ) -> Result<(), InstrumentError>
    where
        I: IntoIterator<Item = Tuple>,
    {
        let name = name.into();
        for k in &key {
            schema.resolve(k)?;
        }
        let mut stored = Vec::new();
        for values in rows {
            if values.len() != schema.len() {
                return Err(InstrumentError::Arity {
                    relation: name.clone(),
                    expected: schema.len(),
                    got: values.len(),
                });
            }
            stored.push(StoredRow {
                values,
                last_txn: None,
            });
        }
        self.tables.insert(
            name,
            Table {
                schema,
                key,
                rows: stored,
            },
        );
        Ok(())
    }

    pub fn schema(&self, relation: &str) -> Option<&Schema> {
        self.tables.get(relation).map(|t| &t.schema)
    }

    pub fn key(&self, relation: &str) -> Option<&[String]> {
        self.tables.get(relation).map(|t| t.key.as_slice())
    }

    pub fn current(&self, relation: &str) -> Option<BagRelation> {
        self.tables
            .get(relation)
            .map(|t| to_bag(&t.schema, &t.rows))
    }

    /// Current versions of all relations.
    pub fn database(&self) -> Database {
        let mut db = Database::new();
        for (n, t) in &self.tables {
            db.insert(n.clone(), to_bag(&t.schema, &t.rows));
        }
        db
    }

    pub fn record(&self, txn: TxnId) -> Option<&TxnRecord> {
        self.history.iter().find(|r| r.id == txn)
    }

    /// Apply the updates in order and commit them as one transaction.
    pub fn execute(&mut self, updates: Vec<Update>) -> Result<TxnId, InstrumentError> {
        let id = TxnId(self.history.len() as u64 + 1);
        let Some(first) = updates.first() else {
            return Err(InstrumentError::EmptyTransaction);
        };
        let relation = first.relation.clone();
        let table = self
            .tables
            .get(&relation)
            .ok_or_else(|| InstrumentError::UnknownRelation(relation.clone()))?;
        let schema = table.schema.clone();
        // Validate through the reenactment builder so both paths accept the
        // same statements.
        reenact(Node::relation(relation.clone(), schema.clone()), &updates)?;
        let start = table.rows.clone();
        let mut rows = start.clone();
        for u in &updates {
            for row in rows.iter_mut() {
                if u.condition.holds(&schema, &row.values)? {
                    let mut next = row.values.clone();
                    for (a, e) in &u.set {
                        next[schema.resolve(a)?] = e.eval(&schema, &row.values)?;
                    }
                    row.values = next;
                    row.last_txn = Some(id);
                }
            }
        }
        let table = self.tables.get_mut(&relation).unwrap();
        table.rows = rows.clone();
        self.history.push(TxnRecord {
            id,
            relation,
            updates,
            start,
            commit: rows,
        });
        Ok(id)
    }

    /// Bindings for reenacting `txn`: the relation at transaction start and
    /// its commit version with the last-writer column.
    pub fn history_database(&self, txn: TxnId) -> Result<Database, InstrumentError> {
        let rec = self
            .record(txn)
            .ok_or(InstrumentError::UnknownTransaction(txn.0))?;
        let schema = &self.tables[&rec.relation].schema;
        let mut db = Database::new();
        db.insert(rec.relation.clone(), to_bag(schema, &rec.start));
        let mut names = schema.names().to_vec();
        names.push(LAST_TXN_ATTR.into());
        let commit = BagRelation::from_rows(
            Schema::new(names)?,
            rec.commit.iter().map(|r| {
                let mut t = r.values.clone();
                t.push(r.last_txn.map_or(Value::Null, |x| Value::Int(x.0 as i64)));
                t
            }),
        );
        db.insert(commit_relation(&rec.relation), commit);
        Ok(db)
    }

    /// Reenactment of `txn` restricted to the rows it modified.
    pub fn scoped_reenactment(
        &self,
        txn: TxnId,
        method: ScopeMethod,
    ) -> Result<QueryGraph, InstrumentError> {
        let rec = self
            .record(txn)
            .ok_or(InstrumentError::UnknownTransaction(txn.0))?;
        let table = &self.tables[&rec.relation];
        scope_to_updated(
            &rec.relation,
            &table.schema,
            &table.key,
            &rec.updates,
            txn,
            method,
        )
    }
}

/// Reenact `updates` over `relation`, restricted to modified rows.
pub fn scope_to_updated(
    relation: &str,
    schema: &Schema,
    key: &[String],
    updates: &[Update],
    txn: TxnId,
    method: ScopeMethod,
) -> Result<QueryGraph, InstrumentError> {
    let base = Node::relation(relation, schema.clone());
    let input = match method {
        ScopeMethod::FilterUpdated => filter_updated(base, updates)?,
        ScopeMethod::HistJoin => {
            if let Some((a, _)) = updates
                .iter()
                .flat_map(|u| u.set.iter())
                .find(|(a, _)| key.contains(a))
            {
                return Err(InstrumentError::KeyModified(a.clone()));
            }
            hist_join(base, relation, key, txn.0)?
        }
    };
    Ok(QueryGraph::new(reenact(input, updates)?))
}
