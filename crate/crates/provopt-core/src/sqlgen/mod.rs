//! Translation of query graphs to SQL text.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::algebra::{
    AggFunc, BoolOp, CmpOp, Expr, Frame, NodeId, NodeRef, Operator, QueryGraph, Value,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SqlError {
    #[error("value {0} has no SQL literal")]
    UnsupportedValue(String),
}

/// Backend-specific spelling.
pub trait Dialect {
    fn ident(&self, name: &str) -> String;
    /// Marker placed on a common table expression that must not be inlined.
    fn materialize_hint(&self) -> &str;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Generic;

#[rustfmt::skip]
const RESERVED: &[&str] = &[
    "all", "and", "as", "asc", "between", "by", "case", "cross", "current", "desc", "distinct",
    "else", "end", "except", "false", "following", "from", "group", "having", "in", "intersect",
    "is", "join", "not", "null", "on", "or", "order", "over", "partition", "preceding", "range",
    "row", "rows", "select", "table", "then", "true", "unbounded", "union", "when", "where", "with",
];

impl Dialect for Generic {
    fn ident(&self, name: &str) -> String {
        let simple = name
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !RESERVED.contains(&name.to_ascii_lowercase().as_str());
        if simple {
            String::from(name)
        } else {
            format!("\"{}\"", name.replace('"', "\"\""))
        }
    }

    fn materialize_hint(&self) -> &str {
        "/*MATERIALIZE*/"
    }
}

/// Generated statement: named subqueries in definition order, then the main
/// query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlUnit {
    pub ctes: Vec<(String, String)>,
    pub body: String,
}

impl SqlUnit {
    pub fn text(&self) -> String {
        if self.ctes.is_empty() {
            return self.body.clone();
        }
        let defs: Vec<String> = self
            .ctes
            .iter()
            .map(|(n, q)| format!("{n} AS {q}"))
            .collect();
        format!("WITH {}\n{}", defs.join(",\n     "), self.body)
    }
}

pub fn to_sql(graph: &QueryGraph) -> Result<SqlUnit, SqlError> {
    to_sql_with(graph, &Generic)
}

pub fn to_sql_with(graph: &QueryGraph, dialect: &dyn Dialect) -> Result<SqlUnit, SqlError> {
    let mut edges: BTreeMap<NodeId, usize> = BTreeMap::new();
    for n in graph.topo_order() {
        for i in n.inputs() {
            *edges.entry(i.id()).or_default() += 1;
        }
    }
    let mut gen = Gen {
        dialect,
        names: BTreeMap::new(),
        ctes: Vec::new(),
        alias: 0,
    };
    let root = graph.root().id();
    for n in graph.topo_order() {
        let is_leaf = matches!(n.op(), Operator::Relation { .. });
        let fenced = edges.get(&n.id()).copied().unwrap_or(0) > 1 || n.flags().materialize;
        if n.id() != root && !is_leaf && fenced {
            let body = gen.select(&n)?;
            let name = format!("q{}", gen.ctes.len() + 1);
            let def = if n.flags().materialize {
                format!("{} ({body})", dialect.materialize_hint())
            } else {
                format!("({body})")
            };
            gen.ctes.push((name.clone(), def));
            gen.names.insert(n.id(), name);
        }
    }
    let body = gen.select(graph.root())?;
    Ok(SqlUnit {
        ctes: gen.ctes,
        body,
    })
}

struct Gen<'a> {
    dialect: &'a dyn Dialect,
    names: BTreeMap<NodeId, String>,
    ctes: Vec<(String, String)>,
    alias: usize,
}

impl Gen<'_> {
    fn id(&self, name: &str) -> String {
        self.dialect.ident(name)
    }

    fn columns(&self, n: &NodeRef) -> String {
        n.schema()
            .iter()
            .map(|a| self.id(a))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// `n` as an item of a FROM clause.
    fn source(&mut self, n: &NodeRef) -> Result<String, SqlError> {
        if let Some(name) = self.names.get(&n.id()) {
            return Ok(name.clone());
        }
        if let Operator::Relation { name, .. } = n.op() {
            return Ok(self.id(name));
        }
        let inner = self.select(n)?;
        self.alias += 1;
        Ok(format!("({inner}) AS t{}", self.alias))
    }

    /// An operand of a set operation, which must be a plain query.
    fn operand(&mut self, n: &NodeRef) -> Result<String, SqlError> {
        if n.op().is_set_op() || self.names.contains_key(&n.id()) {
            let src = self.source(n)?;
            return Ok(format!("SELECT {} FROM {src}", self.columns(n)));
        }
        self.select(n)
    }

    /// `n` as a complete query, ignoring any CTE name it has.
    fn select(&mut self, n: &NodeRef) -> Result<String, SqlError> {
        let cols = self.columns(n);
        Ok(match n.op() {
            Operator::Relation { name, .. } => format!("SELECT {cols} FROM {}", self.id(name)),
            Operator::Select(cond) => {
                let src = self.source(n.input(0))?;
                format!("SELECT {cols} FROM {src} WHERE {}", self.expr(cond)?)
            }
            Operator::Project(items) => {
                let mut list = Vec::new();
                for it in items {
                    if it.is_passthrough() {
                        list.push(self.id(&it.name));
                    } else {
                        list.push(format!("{} AS {}", self.expr(&it.expr)?, self.id(&it.name)));
                    }
                }
                let src = self.source(n.input(0))?;
                format!("SELECT {} FROM {src}", list.join(", "))
            }
            Operator::Join(on) => {
                let l = self.source(n.input(0))?;
                let r = self.source(n.input(1))?;
                let conds: Vec<String> = on
                    .iter()
                    .map(|(a, b)| format!("{}={}", self.id(a), self.id(b)))
                    .collect();
                format!("SELECT {cols} FROM {l} JOIN {r} ON {}", conds.join(" AND "))
            }
            Operator::Cross => {
                let l = self.source(n.input(0))?;
                let r = self.source(n.input(1))?;
                format!("SELECT {cols} FROM {l} CROSS JOIN {r}")
            }
            Operator::Union | Operator::Intersect | Operator::Diff => {
                let kw = match n.op() {
                    Operator::Union => "UNION ALL",
                    Operator::Intersect => "INTERSECT ALL",
                    _ => "EXCEPT ALL",
                };
                let l = self.operand(n.input(0))?;
                let r = self.operand(n.input(1))?;
                format!("{l} {kw} {r}")
            }
            Operator::Agg { group_by, aggs } => {
                let mut list: Vec<String> = group_by.iter().map(|g| self.id(g)).collect();
                for a in aggs {
                    list.push(format!(
                        "{}({}) AS {}",
                        agg_name(a.func),
                        self.id(&a.arg),
                        self.id(&a.out)
                    ));
                }
                let src = self.source(n.input(0))?;
                let mut q = format!("SELECT {} FROM {src}", list.join(", "));
                if !group_by.is_empty() {
                    let g: Vec<String> = group_by.iter().map(|g| self.id(g)).collect();
                    q.push_str(&format!(" GROUP BY {}", g.join(", ")));
                }
                q
            }
            Operator::DupElim => {
                let src = self.source(n.input(0))?;
                format!("SELECT DISTINCT {cols} FROM {src}")
            }
            Operator::Window {
                call,
                partition_by,
                order_by,
                frame,
            } => {
                let mut over = Vec::new();
                if !partition_by.is_empty() {
                    let p: Vec<String> = partition_by.iter().map(|a| self.id(a)).collect();
                    over.push(format!("PARTITION BY {}", p.join(", ")));
                }
                if !order_by.is_empty() {
                    let o: Vec<String> = order_by.iter().map(|a| self.id(a)).collect();
                    over.push(format!("ORDER BY {}", o.join(", ")));
                    over.push(String::from(match frame {
                        Frame::Running => "RANGE BETWEEN UNBOUNDED PRECEDING AND CURRENT ROW",
                        Frame::Whole => "ROWS BETWEEN UNBOUNDED PRECEDING AND UNBOUNDED FOLLOWING",
                    }));
                }
                let src = self.source(n.input(0))?;
                format!(
                    "SELECT {}, {}({}) OVER ({}) AS {} FROM {src}",
                    self.columns(n.input(0)),
                    agg_name(call.func),
                    self.id(&call.arg),
                    over.join(" "),
                    self.id(&call.out)
                )
            }
        })
    }

    fn expr(&self, e: &Expr) -> Result<String, SqlError> {
        Ok(match e {
            Expr::Attr(a) => self.id(a),
            Expr::Const(v) => literal(v)?,
            Expr::Arith(op, l, r) => format!(
                "{}{}{}",
                self.operand_expr(l)?,
                op.symbol(),
                self.operand_expr(r)?
            ),
            Expr::Cmp(op, l, r) => format!(
                "{}{}{}",
                self.operand_expr(l)?,
                cmp_symbol(*op),
                self.operand_expr(r)?
            ),
            Expr::Bool(BoolOp::Not, ops) => format!("NOT {}", self.operand_expr(&ops[0])?),
            Expr::Bool(op, ops) => {
                let sep = if *op == BoolOp::And { " AND " } else { " OR " };
                let parts = ops
                    .iter()
                    .map(|o| self.operand_expr(o))
                    .collect::<Result<Vec<_>, _>>()?;
                parts.join(sep)
            }
            Expr::If(c, t, f) => format!(
                "CASE WHEN {} THEN {} ELSE {} END",
                self.expr(c)?,
                self.expr(t)?,
                self.expr(f)?
            ),
        })
    }

    fn operand_expr(&self, e: &Expr) -> Result<String, SqlError> {
        let s = self.expr(e)?;
        Ok(match e {
            Expr::Attr(_) | Expr::If(..) => s,
            Expr::Const(v) if !matches!(v, Value::Int(i) if *i < 0) => s,
            _ => format!("({s})"),
        })
    }
}

fn literal(v: &Value) -> Result<String, SqlError> {
    Ok(match v {
        Value::Null => String::from("NULL"),
        Value::Bool(true) => String::from("TRUE"),
        Value::Bool(false) => String::from("FALSE"),
        Value::Int(i) => i.to_string(),
        Value::Float(x) if x.is_finite() => v.to_string(),
        Value::Float(_) => return Err(SqlError::UnsupportedValue(v.to_string())),
        Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
    })
}

fn agg_name(f: AggFunc) -> &'static str {
    match f {
        AggFunc::Sum => "SUM",
        AggFunc::Count => "COUNT",
        AggFunc::Min => "MIN",
        AggFunc::Max => "MAX",
        AggFunc::Avg => "AVG",
    }
}

fn cmp_symbol(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Ne => "<>",
        _ => op.symbol(),
    }
}
