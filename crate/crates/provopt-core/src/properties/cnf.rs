use alloc::vec;
use alloc::vec::Vec;

use super::PropertyError;
use crate::algebra::{BoolOp, Expr};

/// Default bound on the number of clauses produced by [`to_cnf`].
pub const DEFAULT_CLAUSE_CAP: usize = 64;

/// Clauses of an equivalent conjunctive normal form. Fails with
/// [`PropertyError::NotCnf`] when distribution would exceed `cap` clauses.
pub fn to_cnf(e: &Expr, cap: usize) -> Result<Vec<Expr>, PropertyError> {
    let clauses = cnf(&push_not(e, false), cap)?;
    Ok(clauses.into_iter().map(disjunction).collect())
}

fn disjunction(mut parts: Vec<Expr>) -> Expr {
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Expr::or(parts)
    }
}

/// Negation normal form. Negated comparisons stay wrapped in `not`, which
/// keeps null semantics intact.
fn push_not(e: &Expr, negate: bool) -> Expr {
    match e {
        Expr::Bool(BoolOp::Not, ops) => push_not(&ops[0], !negate),
        Expr::Bool(op, ops) => {
            let flipped = match (op, negate) {
                (BoolOp::And, true) => BoolOp::Or,
                (BoolOp::Or, true) => BoolOp::And,
                (o, _) => *o,
            };
            Expr::Bool(flipped, ops.iter().map(|o| push_not(o, negate)).collect())
        }
        other if negate => Expr::not(other.clone()),
        other => other.clone(),
    }
}

fn cnf(e: &Expr, cap: usize) -> Result<Vec<Vec<Expr>>, PropertyError> {
    match e {
        Expr::Bool(BoolOp::And, ops) => {
            let mut out = Vec::new();
            for o in ops {
                out.extend(cnf(o, cap)?);
                if out.len() > cap {
                    return Err(PropertyError::NotCnf);
                }
            }
            Ok(out)
        }
        Expr::Bool(BoolOp::Or, ops) => {
            let mut acc: Vec<Vec<Expr>> = vec![Vec::new()];
            for o in ops {
                let rhs = cnf(o, cap)?;
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for a in &acc {
                    for b in &rhs {
                        let mut c = a.clone();
                        c.extend(b.iter().cloned());
                        next.push(c);
                    }
                }
                if next.len() > cap {
                    return Err(PropertyError::NotCnf);
                }
                acc = next;
            }
            Ok(acc)
        }
        other => Ok(vec![vec![other.clone()]]),
    }
}
