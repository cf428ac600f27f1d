use alloc::string::String;

/// Failures raised while building plans or evaluating expressions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    #[error("unresolved attribute `{0}`")]
    UnresolvedAttribute(String),
    #[error("duplicate attribute `{0}` in output schema")]
    DuplicateAttribute(String),
    #[error("arity mismatch: left has {left} attributes, right has {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error("operator `{op}` expects {expected} inputs, got {got}")]
    InputCount {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("avg over an empty group")]
    EmptyAverage,
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("node is not part of the graph")]
    NodeNotFound,
    #[error("substitution would create a cycle")]
    Cycle,
}
