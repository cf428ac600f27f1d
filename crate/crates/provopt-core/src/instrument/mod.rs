//! Provenance instrumentation of queries and reenactment of transactions.

mod query;
mod reenact;
mod store;

use alloc::string::String;

use crate::algebra::AlgebraError;
use crate::cbo::CboError;

pub use query::{instrument_query, AggMethod, AggPolicy};
pub use reenact::{
    commit_relation, filter_updated, hist_join, reenact, reenact_relation, touched_conditions,
    Update, LAST_TXN_ATTR,
};
pub use store::{scope_to_updated, ScopeMethod, StoredRow, TxnId, TxnRecord, VersionedStore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstrumentError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Choice(#[from] CboError),
    #[error("cannot instrument operator `{0}`")]
    Unsupported(&'static str),
    #[error("attribute `{0}` collides with a provenance attribute")]
    SchemaCollision(String),
    #[error("relation `{relation}` has no attribute `{attr}`")]
    UnknownAttribute { relation: String, attr: String },
    #[error("transaction updates both `{0}` and `{1}`")]
    MixedRelations(String, String),
    #[error("relation `{0}` has no declared key")]
    MissingKey(String),
    #[error("update modifies key attribute `{0}`")]
    KeyModified(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown transaction {0}")]
    UnknownTransaction(u64),
    #[error("transaction has no updates")]
    EmptyTransaction,
    #[error("row of `{relation}` has {got} values, expected {expected}")]
    Arity {
        relation: String,
        expected: usize,
        got: usize,
    },
}
