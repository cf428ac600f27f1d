//! Textual plan format.
//!
//! ```text
//! plan  := (rel NAME [(ATTR ...)])
//!        | (select EXPR plan)
//!        | (project (ITEM ...) plan)          ITEM := EXPR -> NAME | ATTR
//!        | (join COND plan plan)              COND := (= A B) | (and (= A B) ...)
//!        | (cross plan plan) | (union plan plan) | (intersect plan plan) | (diff plan plan)
//!        | (dupelim plan)
//!        | (agg (ATTR ...) ((FUNC ATTR NAME) ...) plan)
//!        | (window (FUNC ATTR NAME) (partition ATTR ...) (order ATTR ...) running|whole plan)
//!        | (materialize plan) | (keep plan)
//!        | (let ((NAME plan) ...) plan) | (ref NAME)
//! EXPR  := ATTR | INT | FLOAT | 'text' | true | false | null | (attr NAME)
//!        | (+ EXPR EXPR) | (- ..) | (* ..) | (/ ..)
//!        | (= EXPR EXPR) | (<> ..) | (< ..) | (<= ..) | (> ..) | (>= ..)
//!        | (and EXPR ...) | (or EXPR ...) | (not EXPR) | (if EXPR EXPR EXPR)
//! ```
//!
//! Names that are not plain words are written in double quotes; string
//! constants use single quotes. `;` starts a comment. A relation without an
//! attribute list takes its schema from the catalog. `let` bindings are
//! visible in later bindings and the body, which is how shared subplans are
//! written; printing binds every node with more than one consumer.

use std::collections::BTreeMap;
use std::fmt::Write;

use provopt_core::algebra::{
    AggCall, AggFunc, AlgebraError, ArithOp, BoolOp, CmpOp, Expr, Frame, Node, NodeFlags, NodeId,
    NodeRef, Operator, ProjItem, QueryGraph, Schema, Value,
};

use crate::sexpr::{read_one, Pos, Sexp, SyntaxError};

/// Known relation schemas, by name.
pub type Catalog = BTreeMap<String, Schema>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: {msg}")]
    Invalid { pos: Pos, msg: String },
    #[error("{pos}: {source}")]
    Algebra { pos: Pos, source: AlgebraError },
}

fn invalid(pos: Pos, msg: impl Into<String>) -> PlanError {
    PlanError::Invalid { pos, msg: msg.into() }
}

pub fn parse_plan(text: &str, catalog: &Catalog) -> Result<QueryGraph, PlanError> {
    let form = read_one(text)?;
    let mut p = Parser { catalog, scopes: Vec::new() };
    Ok(QueryGraph::new(p.plan(&form)?))
}

pub fn parse_expr(text: &str) -> Result<Expr, PlanError> {
    expr(&read_one(text)?)
}

struct Parser<'a> {
    catalog: &'a Catalog,
    scopes: Vec<(String, NodeRef)>,
}

fn args(x: &Sexp, n: usize) -> Result<&[Sexp], PlanError> {
    let items = x.list().expect("called on lists");
    if items.len() != n + 1 {
        return Err(invalid(
            x.pos(),
            format!("`{}` takes {n} arguments, got {}", items[0].symbol().unwrap_or("?"), items.len() - 1),
        ));
    }
    Ok(&items[1..])
}

fn name(x: &Sexp) -> Result<String, PlanError> {
    x.name().map(String::from).ok_or_else(|| invalid(x.pos(), "expected a name"))
}

fn names(x: &Sexp) -> Result<Vec<String>, PlanError> {
    let items = x.list().ok_or_else(|| invalid(x.pos(), "expected a list of names"))?;
    items.iter().map(name).collect()
}

fn tagged_names(x: &Sexp, tag: &str) -> Result<Vec<String>, PlanError> {
    match x.list() {
        Some([h, rest @ ..]) if h.symbol() == Some(tag) => rest.iter().map(name).collect(),
        _ => Err(invalid(x.pos(), format!("expected `({tag} ...)`"))),
    }
}

fn agg_call(x: &Sexp) -> Result<AggCall, PlanError> {
    match x.list() {
        Some([f, a, o]) => {
            let func = f
                .symbol()
                .and_then(AggFunc::parse)
                .ok_or_else(|| invalid(f.pos(), "unknown aggregate function"))?;
            Ok(AggCall::new(func, name(a)?, name(o)?))
        }
        _ => Err(invalid(x.pos(), "expected `(FUNC ATTR NAME)`")),
    }
}

impl Parser<'_> {
    fn lookup(&self, n: &str) -> Option<NodeRef> {
        self.scopes.iter().rev().find(|(k, _)| k == n).map(|(_, v)| v.clone())
    }

    fn plan(&mut self, x: &Sexp) -> Result<NodeRef, PlanError> {
        let pos = x.pos();
        let head = x.head().ok_or_else(|| invalid(pos, "expected a plan"))?;
        let wrap = |r: Result<NodeRef, AlgebraError>| r.map_err(|source| PlanError::Algebra { pos, source });
        let items = x.list().expect("has a head");
        match head {
            "rel" => {
                let (n, schema) = match items {
                    [_, n] => {
                        let n = name(n)?;
                        let s = self
                            .catalog
                            .get(&n)
                            .cloned()
                            .ok_or_else(|| invalid(pos, format!("no schema known for relation `{n}`")))?;
                        (n, s)
                    }
                    [_, n, attrs] => {
                        let s = Schema::new(names(attrs)?).map_err(|source| PlanError::Algebra { pos, source })?;
                        (name(n)?, s)
                    }
                    _ => return Err(invalid(pos, "expected `(rel NAME [(ATTR ...)])`")),
                };
                Ok(Node::relation(n, schema))
            }
            "select" => {
                let a = args(x, 2)?;
                let input = self.plan(&a[1])?;
                wrap(Node::select(expr(&a[0])?, input))
            }
            "project" => {
                let a = args(x, 2)?;
                let list = a[0].list().ok_or_else(|| invalid(a[0].pos(), "expected a list of items"))?;
                let mut out = Vec::new();
                let mut i = 0;
                while i < list.len() {
                    let e = expr(&list[i])?;
                    if list.get(i + 1).and_then(Sexp::symbol) == Some("->") {
                        let target = list.get(i + 2).ok_or_else(|| invalid(list[i + 1].pos(), "missing name after `->`"))?;
                        out.push(ProjItem::new(e, name(target)?));
                        i += 3;
                    } else {
                        let a = e.as_attr().ok_or_else(|| invalid(list[i].pos(), "expression needs `-> NAME`"))?;
                        out.push(ProjItem::keep(a));
                        i += 1;
                    }
                }
                let input = self.plan(&a[1])?;
                wrap(Node::project(out, input))
            }
            "join" => {
                let a = args(x, 3)?;
                let l = self.plan(&a[1])?;
                let r = self.plan(&a[2])?;
                let mut pairs = Vec::new();
                for c in expr(&a[0])?.conjuncts() {
                    let Expr::Cmp(CmpOp::Eq, x, y) = &c else {
                        return Err(invalid(a[0].pos(), "join condition must be equalities"));
                    };
                    let (Some(x), Some(y)) = (x.as_attr(), y.as_attr()) else {
                        return Err(invalid(a[0].pos(), "join condition must compare attributes"));
                    };
                    if l.schema().contains(x) && r.schema().contains(y) {
                        pairs.push((x.to_string(), y.to_string()));
                    } else if l.schema().contains(y) && r.schema().contains(x) {
                        pairs.push((y.to_string(), x.to_string()));
                    } else {
                        return Err(invalid(a[0].pos(), format!("`{x}={y}` does not relate the two inputs")));
                    }
                }
                wrap(Node::join(pairs, l, r))
            }
            "cross" | "union" | "intersect" | "diff" => {
                let a = args(x, 2)?;
                let l = self.plan(&a[0])?;
                let r = self.plan(&a[1])?;
                wrap(match head {
                    "cross" => Node::cross(l, r),
                    "union" => Node::union(l, r),
                    "intersect" => Node::intersect(l, r),
                    _ => Node::diff(l, r),
                })
            }
            "dupelim" => {
                let input = self.plan(&args(x, 1)?[0])?;
                wrap(Node::dup_elim(input))
            }
            "agg" => {
                let a = args(x, 3)?;
                let group = names(&a[0])?;
                let calls = a[1]
                    .list()
                    .ok_or_else(|| invalid(a[1].pos(), "expected a list of aggregates"))?
                    .iter()
                    .map(agg_call)
                    .collect::<Result<_, _>>()?;
                let input = self.plan(&a[2])?;
                wrap(Node::agg(group, calls, input))
            }
            "window" => {
                let a = args(x, 5)?;
                let call = agg_call(&a[0])?;
                let part = tagged_names(&a[1], "partition")?;
                let order = tagged_names(&a[2], "order")?;
                let frame = match a[3].symbol() {
                    Some("running") => Frame::Running,
                    Some("whole") => Frame::Whole,
                    _ => return Err(invalid(a[3].pos(), "frame must be `running` or `whole`")),
                };
                let input = self.plan(&a[4])?;
                wrap(Node::window(call, part, order, frame, input))
            }
            "materialize" | "keep" => {
                let inner = self.plan(&args(x, 1)?[0])?;
                let mut flags = inner.flags();
                if head == "materialize" {
                    flags.materialize = true;
                } else {
                    flags.keep = true;
                }
                Ok(Node::with_new_flags(&inner, flags))
            }
            "let" => {
                let a = args(x, 2)?;
                let binds = a[0].list().ok_or_else(|| invalid(a[0].pos(), "expected bindings"))?;
                let depth = self.scopes.len();
                for b in binds {
                    let [n, p] = b.list().unwrap_or(&[]) else {
                        return Err(invalid(b.pos(), "expected `(NAME plan)`"));
                    };
                    let node = self.plan(p)?;
                    self.scopes.push((name(n)?, node));
                }
                let body = self.plan(&a[1]);
                self.scopes.truncate(depth);
                body
            }
            "ref" => {
                let n = name(&args(x, 1)?[0])?;
                self.lookup(&n).ok_or_else(|| invalid(pos, format!("unbound name `{n}`")))
            }
            other => Err(invalid(pos, format!("unknown operator `{other}`"))),
        }
    }
}

fn number(s: &str) -> Option<Value> {
    let mut cs = s.chars();
    let first = cs.next()?;
    let numeric = first.is_ascii_digit() || (matches!(first, '-' | '+' | '.') && cs.next().is_some_and(|c| c.is_ascii_digit() || c == '.'));
    if !numeric {
        return None;
    }
    if !s.contains(['.', 'e', 'E']) {
        if let Ok(i) = s.parse::<i64>() {
            return Some(Value::Int(i));
        }
    }
    s.parse::<f64>().ok().filter(|f| f.is_finite()).map(Value::Float)
}

fn expr(x: &Sexp) -> Result<Expr, PlanError> {
    let pos = x.pos();
    match x {
        Sexp::Symbol(s, _) => Ok(match s.as_str() {
            "true" => Expr::Const(Value::Bool(true)),
            "false" => Expr::Const(Value::Bool(false)),
            "null" => Expr::Const(Value::Null),
            _ => match number(s) {
                Some(v) => Expr::Const(v),
                None if s.starts_with(|c: char| c.is_ascii_digit()) => return Err(invalid(pos, format!("bad number `{s}`"))),
                None => Expr::Attr(s.clone()),
            },
        }),
        Sexp::Quoted(s, _) => Ok(Expr::Attr(s.clone())),
        Sexp::Str(s, _) => Ok(Expr::Const(Value::Str(s.clone()))),
        Sexp::List(items, _) => {
            let head = x.head().ok_or_else(|| invalid(pos, "expected an operator"))?;
            let ops = items[1..].iter().map(expr);
            let arith = |op| -> Result<Expr, PlanError> {
                let a = args(x, 2)?;
                Ok(Expr::arith(op, expr(&a[0])?, expr(&a[1])?))
            };
            let cmp = |op| -> Result<Expr, PlanError> {
                let a = args(x, 2)?;
                Ok(Expr::cmp(op, expr(&a[0])?, expr(&a[1])?))
            };
            match head {
                "attr" => Ok(Expr::Attr(name(&args(x, 1)?[0])?)),
                "+" => arith(ArithOp::Add),
                "-" => arith(ArithOp::Sub),
                "*" => arith(ArithOp::Mul),
                "/" => arith(ArithOp::Div),
                "=" => cmp(CmpOp::Eq),
                "<>" => cmp(CmpOp::Ne),
                "<" => cmp(CmpOp::Lt),
                "<=" => cmp(CmpOp::Le),
                ">" => cmp(CmpOp::Gt),
                ">=" => cmp(CmpOp::Ge),
                "and" | "or" if items.len() >= 3 => {
                    let op = if head == "and" { BoolOp::And } else { BoolOp::Or };
                    Ok(Expr::Bool(op, ops.collect::<Result<_, _>>()?))
                }
                "and" | "or" => Err(invalid(pos, format!("`{head}` needs at least two operands"))),
                "not" => Ok(Expr::not(expr(&args(x, 1)?[0])?)),
                "if" => {
                    let a = args(x, 3)?;
                    Ok(Expr::if_then_else(expr(&a[0])?, expr(&a[1])?, expr(&a[2])?))
                }
                other => Err(invalid(pos, format!("unknown expression operator `{other}`"))),
            }
        }
    }
}

const KEYWORDS: &[&str] = &["true", "false", "null", "->"];

fn print_name(n: &str) -> String {
    let plain = !n.is_empty()
        && !n.contains(|c: char| c.is_whitespace() || matches!(c, '(' | ')' | '"' | '\'' | ';'))
        && !KEYWORDS.contains(&n)
        && number(n).is_none()
        && !n.starts_with(|c: char| c.is_ascii_digit());
    if plain {
        n.to_string()
    } else {
        format!("\"{}\"", n.replace('"', "\"\""))
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Attr(a) => print_name(a),
        Expr::Const(Value::Null) => "null".into(),
        Expr::Const(Value::Bool(b)) => b.to_string(),
        Expr::Const(Value::Int(i)) => i.to_string(),
        Expr::Const(Value::Float(f)) => format!("{f:?}"),
        Expr::Const(Value::Str(s)) => format!("'{}'", s.replace('\'', "''")),
        Expr::Arith(op, l, r) => format!("({} {} {})", op.symbol(), print_expr(l), print_expr(r)),
        Expr::Cmp(op, l, r) => {
            let sym = if *op == CmpOp::Ne { "<>" } else { op.symbol() };
            format!("({sym} {} {})", print_expr(l), print_expr(r))
        }
        Expr::Bool(op, ops) => {
            let head = match op {
                BoolOp::And => "and",
                BoolOp::Or => "or",
                BoolOp::Not => "not",
            };
            let parts: Vec<String> = ops.iter().map(print_expr).collect();
            format!("({head} {})", parts.join(" "))
        }
        Expr::If(c, t, f) => format!("(if {} {} {})", print_expr(c), print_expr(t), print_expr(f)),
    }
}

fn print_names(ns: &[String]) -> String {
    ns.iter().map(|n| print_name(n)).collect::<Vec<_>>().join(" ")
}

fn print_call(c: &AggCall) -> String {
    format!("({} {} {})", c.func.name(), print_name(&c.arg), print_name(&c.out))
}

/// Operator name and arguments of a node, without inputs.
fn header(n: &NodeRef) -> String {
    match n.op() {
        Operator::Relation { name, schema } => format!("rel {} ({})", print_name(name), print_names(schema.names())),
        Operator::Select(c) => format!("select {}", print_expr(c)),
        Operator::Project(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|it| {
                    if it.is_passthrough() {
                        print_name(&it.name)
                    } else {
                        format!("{} -> {}", print_expr(&it.expr), print_name(&it.name))
                    }
                })
                .collect();
            format!("project ({})", parts.join(" "))
        }
        Operator::Join(on) => {
            let eqs: Vec<Expr> = on.iter().map(|(a, b)| Expr::Attr(a.clone()).eq(Expr::Attr(b.clone()))).collect();
            format!("join {}", print_expr(&Expr::conjunction(eqs)))
        }
        Operator::Agg { group_by, aggs } => {
            let calls: Vec<String> = aggs.iter().map(print_call).collect();
            format!("agg ({}) ({})", print_names(group_by), calls.join(" "))
        }
        Operator::Window { call, partition_by, order_by, frame } => {
            let frame = match frame {
                Frame::Running => "running",
                Frame::Whole => "whole",
            };
            let part = if partition_by.is_empty() { "(partition)".into() } else { format!("(partition {})", print_names(partition_by)) };
            let order = if order_by.is_empty() { "(order)".into() } else { format!("(order {})", print_names(order_by)) };
            format!("window {} {part} {order} {frame}", print_call(call))
        }
        op => op.kind().to_string(),
    }
}

struct Printer<'a> {
    out: String,
    bound: BTreeMap<NodeId, String>,
    annotate: &'a dyn Fn(&NodeRef) -> Vec<String>,
}

impl Printer<'_> {
    fn line(&mut self, indent: usize, text: &str) {
        if !self.out.is_empty() && !self.out.ends_with('\n') {
            self.out.push('\n');
        }
        let _ = write!(self.out, "{:indent$}{text}", "");
    }

    fn node(&mut self, n: &NodeRef, indent: usize, expand: bool) {
        if !expand {
            if let Some(b) = self.bound.get(&n.id()) {
                let b = format!("(ref {b})");
                self.line(indent, &b);
                return;
            }
        }
        for note in (self.annotate)(n) {
            self.line(indent, &format!("; {note}"));
        }
        let mut indent = indent;
        let mut wrappers = 0;
        let NodeFlags { materialize, keep } = n.flags();
        for (on, kw) in [(materialize, "(materialize"), (keep, "(keep")] {
            if on {
                self.line(indent, kw);
                indent += 2;
                wrappers += 1;
            }
        }
        self.line(indent, &format!("({}", header(n)));
        for c in n.inputs() {
            self.node(c, indent + 2, false);
        }
        self.out.push(')');
        for _ in 0..wrappers {
            self.out.push(')');
        }
    }
}

/// Pretty-printed plan, one operator per line.
pub fn print_plan(g: &QueryGraph) -> String {
    print_plan_annotated(g, &|_| Vec::new())
}

/// Pretty-printed plan with comment lines produced by `annotate` placed
/// above each operator.
pub fn print_plan_annotated(g: &QueryGraph, annotate: &dyn Fn(&NodeRef) -> Vec<String>) -> String {
    let mut edges: BTreeMap<NodeId, usize> = BTreeMap::new();
    for n in g.topo_order() {
        for c in n.inputs() {
            *edges.entry(c.id()).or_default() += 1;
        }
    }
    let shared: Vec<NodeRef> = g.topo_order().into_iter().filter(|n| edges.get(&n.id()).copied().unwrap_or(0) > 1).collect();
    let mut p = Printer { out: String::new(), bound: BTreeMap::new(), annotate };
    if shared.is_empty() {
        p.node(g.root(), 0, true);
    } else {
        p.line(0, "(let (");
        for (i, n) in shared.iter().enumerate() {
            let b = format!("s{}", i + 1);
            p.line(6, &format!("({b}"));
            p.node(n, 8, true);
            p.out.push(')');
            p.bound.insert(n.id(), b);
        }
        p.out.push(')');
        p.node(g.root(), 2, true);
        p.out.push(')');
    }
    p.out.push('\n');
    p.out
}
