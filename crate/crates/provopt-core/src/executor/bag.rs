use alloc::collections::btree_map::{self, BTreeMap};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::algebra::{Schema, Tuple, Value};

/// Relation under bag semantics: each distinct tuple maps to a positive
/// multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagRelation {
    schema: Schema,
    rows: BTreeMap<Tuple, u64>,
}

impl BagRelation {
    pub fn new(schema: Schema) -> Self {
        BagRelation {
            schema,
            rows: BTreeMap::new(),
        }
    }

    pub fn from_rows<I>(schema: Schema, rows: I) -> Self
    where
        I: IntoIterator<Item = Tuple>,
    {
        let mut r = BagRelation::new(schema);
        for t in rows {
            r.insert(t, 1);
        }
        r
    }

    /// Add `mult` copies of `tuple`. Zero multiplicities are ignored.
    pub fn insert(&mut self, tuple: Tuple, mult: u64) {
        debug_assert_eq!(tuple.len(), self.schema.len());
        if mult > 0 {
            *self.rows.entry(tuple).or_insert(0) += mult;
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn multiplicity(&self, tuple: &[Value]) -> u64 {
        self.rows.get(tuple).copied().unwrap_or(0)
    }

    /// Number of distinct tuples.
    pub fn distinct_len(&self) -> usize {
        self.rows.len()
    }

    /// Number of tuples counting duplicates.
    pub fn total(&self) -> u64 {
        self.rows.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, Tuple, u64> {
        self.rows.iter()
    }

    /// Same tuples, every multiplicity set to one.
    pub fn dedup(&self) -> BagRelation {
        BagRelation {
            schema: self.schema.clone(),
            rows: self.rows.keys().map(|t| (t.clone(), 1)).collect(),
        }
    }

    /// Bag equality ignoring attribute names.
    pub fn same_bag(&self, other: &BagRelation) -> bool {
        self.rows == other.rows
    }

    /// Keep the listed attributes (bag projection).
    pub fn project(&self, names: &[String]) -> Option<BagRelation> {
        let idx: Option<Vec<usize>> = names.iter().map(|n| self.schema.index_of(n)).collect();
        let idx = idx?;
        let schema = Schema::new(names.to_vec()).ok()?;
        let mut out = BagRelation::new(schema);
        for (t, m) in &self.rows {
            out.insert(idx.iter().map(|&i| t[i].clone()).collect(), *m);
        }
        Some(out)
    }

    pub fn with_schema(mut self, schema: Schema) -> BagRelation {
        assert_eq!(schema.len(), self.schema.len());
        self.schema = schema;
        self
    }
}

impl fmt::Display for BagRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} [mult]", self.schema)?;
        for (t, m) in &self.rows {
            f.write_str("(")?;
            for (i, v) in t.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{v}")?;
            }
            writeln!(f, ") x{m}")?;
        }
        Ok(())
    }
}

/// Named base relations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    relations: BTreeMap<String, BagRelation>,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, rel: BagRelation) {
        self.relations.insert(name.into(), rel);
    }

    pub fn get(&self, name: &str) -> Option<&BagRelation> {
        self.relations.get(name)
    }

    pub fn iter(&self) -> btree_map::Iter<'_, String, BagRelation> {
        self.relations.iter()
    }
}
