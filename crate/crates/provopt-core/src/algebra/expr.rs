use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use super::{AlgebraError, Schema, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolOp {
    And,
    Or,
    Not,
}

/// Scalar expression over the attributes of one input tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expr {
    Attr(String),
    Const(Value),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Bool(BoolOp, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

pub fn attr(name: impl Into<String>) -> Expr {
    Expr::Attr(name.into())
}

pub fn lit(v: impl Into<Value>) -> Expr {
    Expr::Const(v.into())
}

impl Expr {
    pub fn arith(op: ArithOp, l: Expr, r: Expr) -> Expr {
        Expr::Arith(op, Box::new(l), Box::new(r))
    }

    pub fn cmp(op: CmpOp, l: Expr, r: Expr) -> Expr {
        Expr::Cmp(op, Box::new(l), Box::new(r))
    }

    pub fn add(self, r: Expr) -> Expr {
        Expr::arith(ArithOp::Add, self, r)
    }

    pub fn sub(self, r: Expr) -> Expr {
        Expr::arith(ArithOp::Sub, self, r)
    }

    pub fn mul(self, r: Expr) -> Expr {
        Expr::arith(ArithOp::Mul, self, r)
    }

    pub fn div(self, r: Expr) -> Expr {
        Expr::arith(ArithOp::Div, self, r)
    }

    pub fn eq(self, r: Expr) -> Expr {
        Expr::cmp(CmpOp::Eq, self, r)
    }

    pub fn ne(self, r: Expr) -> Expr {
        Expr::cmp(CmpOp::Ne, self, r)
    }

    pub fn lt(self, r: Expr) -> Expr {
        Expr::cmp(CmpOp::Lt, self, r)
    }

    pub fn le(self, r: Expr) -> Expr {
        Expr::cmp(CmpOp::Le, self, r)
    }

    pub fn gt(self, r: Expr) -> Expr {
        Expr::cmp(CmpOp::Gt, self, r)
    }

    pub fn ge(self, r: Expr) -> Expr {
        Expr::cmp(CmpOp::Ge, self, r)
    }

    pub fn and(operands: Vec<Expr>) -> Expr {
        Expr::Bool(BoolOp::And, operands)
    }

    pub fn or(operands: Vec<Expr>) -> Expr {
        Expr::Bool(BoolOp::Or, operands)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Bool(BoolOp::Not, vec![e])
    }

    pub fn if_then_else(cond: Expr, then: Expr, otherwise: Expr) -> Expr {
        Expr::If(Box::new(cond), Box::new(then), Box::new(otherwise))
    }

    pub fn as_attr(&self) -> Option<&str> {
        match self {
            Expr::Attr(a) => Some(a),
            _ => None,
        }
    }

    /// Number of nodes in the expression tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Attr(_) | Expr::Const(_) => 1,
            Expr::Arith(_, l, r) | Expr::Cmp(_, l, r) => 1 + l.size() + r.size(),
            Expr::Bool(_, ops) => 1 + ops.iter().map(Expr::size).sum::<usize>(),
            Expr::If(c, t, e) => 1 + c.size() + t.size() + e.size(),
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Attr(_) | Expr::Const(_) => Vec::new(),
            Expr::Arith(_, l, r) | Expr::Cmp(_, l, r) => vec![l, r],
            Expr::Bool(_, ops) => ops.iter().collect(),
            Expr::If(c, t, e) => vec![c, t, e],
        }
    }

    /// Attributes referenced anywhere in the expression.
    pub fn columns(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut BTreeSet<String>) {
        if let Expr::Attr(a) = self {
            out.insert(a.clone());
        }
        for c in self.children() {
            c.collect_columns(out);
        }
    }

    /// Number of occurrences of `name`.
    pub fn count_refs(&self, name: &str) -> usize {
        match self {
            Expr::Attr(a) => usize::from(a == name),
            _ => self.children().iter().map(|c| c.count_refs(name)).sum(),
        }
    }

    /// Replace attribute references according to `map`; unmapped attributes
    /// stay as they are.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        self.map_attrs(&mut |a| map.get(a).cloned())
    }

    pub fn rename(&self, map: &BTreeMap<String, String>) -> Expr {
        self.map_attrs(&mut |a| map.get(a).map(|n| Expr::Attr(n.clone())))
    }

    fn map_attrs(&self, f: &mut dyn FnMut(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Attr(a) => f(a).unwrap_or_else(|| self.clone()),
            Expr::Const(_) => self.clone(),
            Expr::Arith(op, l, r) => Expr::arith(*op, l.map_attrs(f), r.map_attrs(f)),
            Expr::Cmp(op, l, r) => Expr::cmp(*op, l.map_attrs(f), r.map_attrs(f)),
            Expr::Bool(op, ops) => Expr::Bool(*op, ops.iter().map(|o| o.map_attrs(f)).collect()),
            Expr::If(c, t, e) => Expr::if_then_else(c.map_attrs(f), t.map_attrs(f), e.map_attrs(f)),
        }
    }

    /// Rebuild bottom-up, applying `f` to every node after its children.
    pub fn transform_up(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Attr(_) | Expr::Const(_) => self.clone(),
            Expr::Arith(op, l, r) => Expr::arith(*op, l.transform_up(f), r.transform_up(f)),
            Expr::Cmp(op, l, r) => Expr::cmp(*op, l.transform_up(f), r.transform_up(f)),
            Expr::Bool(op, ops) => Expr::Bool(*op, ops.iter().map(|o| o.transform_up(f)).collect()),
            Expr::If(c, t, e) => {
                Expr::if_then_else(c.transform_up(f), t.transform_up(f), e.transform_up(f))
            }
        };
        f(rebuilt)
    }

    /// Top-level conjuncts (flattening nested ANDs).
    pub fn conjuncts(&self) -> Vec<Expr> {
        match self {
            Expr::Bool(BoolOp::And, ops) => ops.iter().flat_map(Expr::conjuncts).collect(),
            _ => vec![self.clone()],
        }
    }

    /// Conjunction of `parts`; a single part is returned unchanged.
    pub fn conjunction(mut parts: Vec<Expr>) -> Expr {
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else if parts.is_empty() {
            lit(true)
        } else {
            Expr::and(parts)
        }
    }

    pub fn check(&self, schema: &Schema) -> Result<(), AlgebraError> {
        for c in self.columns() {
            schema.resolve(&c)?;
        }
        Ok(())
    }

    pub fn eval(&self, schema: &Schema, tuple: &[Value]) -> Result<Value, AlgebraError> {
        match self {
            Expr::Attr(a) => Ok(tuple[schema.resolve(a)?].clone()),
            Expr::Const(v) => Ok(v.clone()),
            Expr::Arith(op, l, r) => arith(*op, &l.eval(schema, tuple)?, &r.eval(schema, tuple)?),
            Expr::Cmp(op, l, r) => compare(*op, &l.eval(schema, tuple)?, &r.eval(schema, tuple)?),
            Expr::Bool(BoolOp::Not, ops) => Ok(match truth(&ops[0].eval(schema, tuple)?)? {
                Some(b) => Value::Bool(!b),
                None => Value::Null,
            }),
            Expr::Bool(op, ops) => {
                // Left to right, stopping at the first deciding operand.
                let decisive = *op == BoolOp::Or;
                let mut unknown = false;
                for o in ops {
                    match truth(&o.eval(schema, tuple)?)? {
                        Some(b) if b == decisive => return Ok(Value::Bool(decisive)),
                        Some(_) => {}
                        None => unknown = true,
                    }
                }
                Ok(if unknown {
                    Value::Null
                } else {
                    Value::Bool(!decisive)
                })
            }
            Expr::If(c, t, e) => {
                if truth(&c.eval(schema, tuple)?)? == Some(true) {
                    t.eval(schema, tuple)
                } else {
                    e.eval(schema, tuple)
                }
            }
        }
    }

    /// Predicate evaluation: null counts as false.
    pub fn holds(&self, schema: &Schema, tuple: &[Value]) -> Result<bool, AlgebraError> {
        Ok(truth(&self.eval(schema, tuple)?)? == Some(true))
    }
}

fn truth(v: &Value) -> Result<Option<bool>, AlgebraError> {
    match v {
        Value::Bool(b) => Ok(Some(*b)),
        Value::Null => Ok(None),
        other => Err(AlgebraError::Type(alloc::format!(
            "expected bool, found {}",
            other.type_name()
        ))),
    }
}

/// Arithmetic on two values. Integers stay integral (division truncates);
/// any float operand makes the result a float; null propagates.
pub fn arith(op: ArithOp, l: &Value, r: &Value) -> Result<Value, AlgebraError> {
    match (l, r) {
        (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
        (Value::Int(a), Value::Int(b)) => {
            let res = match op {
                ArithOp::Add => a.checked_add(*b),
                ArithOp::Sub => a.checked_sub(*b),
                ArithOp::Mul => a.checked_mul(*b),
                ArithOp::Div => {
                    if *b == 0 {
                        return Err(AlgebraError::DivisionByZero);
                    }
                    a.checked_div(*b)
                }
            };
            res.map(Value::Int).ok_or(AlgebraError::Overflow)
        }
        _ => match (l.as_f64(), r.as_f64()) {
            (Some(a), Some(b)) => Ok(Value::Float(match op {
                ArithOp::Add => a + b,
                ArithOp::Sub => a - b,
                ArithOp::Mul => a * b,
                ArithOp::Div => {
                    if b == 0.0 {
                        return Err(AlgebraError::DivisionByZero);
                    }
                    a / b
                }
            })),
            _ => Err(AlgebraError::Type(alloc::format!(
                "cannot apply `{}` to {} and {}",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ))),
        },
    }
}

/// Comparison: a null operand makes every comparison false except `<>`.
pub fn compare(op: CmpOp, l: &Value, r: &Value) -> Result<Value, AlgebraError> {
    if l.is_null() || r.is_null() {
        return Ok(Value::Bool(op == CmpOp::Ne));
    }
    match l.sql_cmp(r) {
        Some(ord) => Ok(Value::Bool(op.holds(ord))),
        None if matches!(l, Value::Float(_)) || matches!(r, Value::Float(_)) => {
            // NaN involved.
            Ok(Value::Bool(op == CmpOp::Ne))
        }
        None => Err(AlgebraError::Type(alloc::format!(
            "cannot compare {} with {}",
            l.type_name(),
            r.type_name()
        ))),
    }
}

fn fmt_operand(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Attr(_) | Expr::Const(_) => write!(f, "{e}"),
        _ => write!(f, "({e})"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Attr(a) => f.write_str(a),
            Expr::Const(Value::Str(s)) => write!(f, "'{s}'"),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Arith(op, l, r) => {
                fmt_operand(l, f)?;
                f.write_str(op.symbol())?;
                fmt_operand(r, f)
            }
            Expr::Cmp(op, l, r) => {
                fmt_operand(l, f)?;
                f.write_str(op.symbol())?;
                fmt_operand(r, f)
            }
            Expr::Bool(BoolOp::Not, ops) => {
                f.write_str("not ")?;
                fmt_operand(&ops[0], f)
            }
            Expr::Bool(op, ops) => {
                let sep = if *op == BoolOp::And { " and " } else { " or " };
                for (i, o) in ops.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    fmt_operand(o, f)?;
                }
                Ok(())
            }
            Expr::If(c, t, e) => write!(f, "if {c} then {t} else {e}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::from_names(["a", "b", "s"]).unwrap()
    }

    fn row() -> Vec<Value> {
        vec![Value::Int(7), Value::Float(2.5), Value::from("x")]
    }

    #[test]
    fn size_counts_nodes() {
        let e = attr("a").add(attr("d").add(attr("e")));
        assert_eq!(e.size(), 5);
        assert_eq!(attr("a").size(), 1);
    }

    #[test]
    fn integer_division_truncates_and_checks_zero() {
        assert_eq!(
            arith(ArithOp::Div, &Value::Int(7), &Value::Int(2)),
            Ok(Value::Int(3))
        );
        assert_eq!(
            arith(ArithOp::Div, &Value::Int(7), &Value::Int(0)),
            Err(AlgebraError::DivisionByZero)
        );
        assert_eq!(
            arith(ArithOp::Div, &Value::Float(1.0), &Value::Int(0)),
            Err(AlgebraError::DivisionByZero)
        );
    }

    #[test]
    fn mixed_arithmetic_promotes_to_float() {
        let e = attr("a").add(attr("b"));
        assert_eq!(e.eval(&schema(), &row()), Ok(Value::Float(9.5)));
    }

    #[test]
    fn comparisons_with_null() {
        assert_eq!(
            compare(CmpOp::Eq, &Value::Null, &Value::Null),
            Ok(Value::Bool(false))
        );
        assert_eq!(
            compare(CmpOp::Ne, &Value::Null, &Value::Int(1)),
            Ok(Value::Bool(true))
        );
        assert_eq!(
            compare(CmpOp::Lt, &Value::Null, &Value::Int(1)),
            Ok(Value::Bool(false))
        );
    }

    #[test]
    fn type_errors_surface() {
        let e = attr("s").add(lit(1));
        assert!(matches!(
            e.eval(&schema(), &row()),
            Err(AlgebraError::Type(_))
        ));
        let e = Expr::and(vec![attr("a")]);
        assert!(matches!(
            e.eval(&schema(), &row()),
            Err(AlgebraError::Type(_))
        ));
    }

    #[test]
    fn conditional_picks_branch() {
        let e = Expr::if_then_else(attr("a").gt(lit(5)), lit(1), lit(0));
        assert_eq!(e.eval(&schema(), &row()), Ok(Value::Int(1)));
    }

    #[test]
    fn substitution_and_refs() {
        let e = Expr::if_then_else(attr("b").eq(lit(2)), attr("a").add(lit(2)), attr("a"));
        assert_eq!(e.count_refs("a"), 2);
        let mut m = BTreeMap::new();
        m.insert("a".into(), attr("x").mul(lit(3)));
        let s = e.substitute(&m);
        assert_eq!(s.count_refs("x"), 2);
        assert_eq!(s.count_refs("a"), 0);
    }

    #[test]
    fn conjunct_flattening() {
        let e = Expr::and(vec![
            attr("a").eq(lit(1)),
            Expr::and(vec![attr("b").lt(lit(2)), attr("c").gt(lit(0))]),
        ]);
        assert_eq!(e.conjuncts().len(), 3);
    }

    #[test]
    fn display_is_compact() {
        let e = Expr::if_then_else(attr("b").eq(lit(2)), attr("a").add(lit(2)), attr("a"));
        assert_eq!(alloc::format!("{e}"), "if b=2 then a+2 else a");
    }
}
