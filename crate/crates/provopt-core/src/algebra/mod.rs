//! Relational algebra over bags: values, expressions, operators and the
//! immutable query DAG.

mod error;
mod expr;
mod graph;
mod operator;
mod schema;
mod value;

pub use error::AlgebraError;
pub use expr::{arith, attr, compare, lit, ArithOp, BoolOp, CmpOp, Expr};
pub use graph::{schema_of, Ancestry, Node, NodeFlags, NodeId, NodeRef, QueryGraph};
pub use operator::{AggCall, AggFunc, Frame, Operator, ProjItem};
pub use schema::Schema;
pub use value::{Tuple, Value, ValueType};
