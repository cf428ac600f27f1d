use alloc::boxed::Box;

use crate::algebra::{lit, ArithOp, Expr};

fn neutral(op: ArithOp) -> Expr {
    match op {
        ArithOp::Add | ArithOp::Sub => lit(0),
        ArithOp::Mul | ArithOp::Div => lit(1),
    }
}

fn commutes(op: ArithOp) -> bool {
    matches!(op, ArithOp::Add | ArithOp::Mul)
}

/// `base ⊕ operand` when `e` has that shape (either operand order for
/// commutative operators).
fn split(e: &Expr, base: &Expr) -> Option<(ArithOp, Expr)> {
    let Expr::Arith(op, l, r) = e else {
        return None;
    };
    if **l == *base {
        Some((*op, (**r).clone()))
    } else if **r == *base && commutes(*op) {
        Some((*op, (**l).clone()))
    } else {
        None
    }
}

fn factor_once(e: Expr) -> Expr {
    let Expr::If(cond, then, otherwise) = &e else {
        return e;
    };
    if let Some((op, operand)) = split(then, otherwise) {
        let inner = Expr::if_then_else((**cond).clone(), operand, neutral(op));
        return Expr::Arith(op, otherwise.clone(), Box::new(inner));
    }
    if let Some((op, operand)) = split(otherwise, then) {
        let inner = Expr::if_then_else((**cond).clone(), neutral(op), operand);
        return Expr::Arith(op, then.clone(), Box::new(inner));
    }
    e
}

/// Move a shared operand out of both branches of every conditional:
/// `if θ then a ⊕ c else a` becomes `a ⊕ (if θ then c else n)` with `n`
/// neutral for `⊕`.
pub fn factor_expr(e: &Expr) -> Expr {
    e.transform_up(&mut factor_once)
}
