//! Reference evaluator: bag semantics, provenance-annotated semantics and
//! the cost model used by the optimizer.

mod annotated;
mod bag;
mod cost;
mod eval;

use alloc::string::String;

use crate::algebra::AlgebraError;

pub use annotated::{
    encode_provenance, evaluate_annotated, is_prov_attr, prov_attr_name, prov_leaves,
    AnnotatedRelation, AnnotatedRow, Monomial, Polynomial, ProvLeaf, ProvVar,
};
pub use bag::{BagRelation, Database};
pub use cost::{estimate, plan_cost, CostParams, Estimate, RelStats, Statistics};
pub use eval::{aggregate, evaluate, evaluate_nodes};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("stored relation `{relation}` does not match the plan schema")]
    SchemaMismatch { relation: String },
    #[error("operator `{0}` is not supported by annotated evaluation")]
    Unsupported(&'static str),
}
