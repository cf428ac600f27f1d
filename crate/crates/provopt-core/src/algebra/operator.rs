use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{Expr, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggFunc {
    Sum,
    Count,
    Min,
    Max,
    Avg,
}

impl AggFunc {
    pub const ALL: [AggFunc; 5] = [
        AggFunc::Sum,
        AggFunc::Count,
        AggFunc::Min,
        AggFunc::Max,
        AggFunc::Avg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Sum => "sum",
            AggFunc::Count => "count",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
            AggFunc::Avg => "avg",
        }
    }

    pub fn parse(s: &str) -> Option<AggFunc> {
        AggFunc::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
    }
}

/// `func(arg) -> out`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AggCall {
    pub func: AggFunc,
    pub arg: String,
    pub out: String,
}

impl AggCall {
    pub fn new(func: AggFunc, arg: impl Into<String>, out: impl Into<String>) -> Self {
        AggCall {
            func,
            arg: arg.into(),
            out: out.into(),
        }
    }
}

impl fmt::Display for AggCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})->{}", self.func.name(), self.arg, self.out)
    }
}

/// Window frame: rows up to and including order-peers, or the whole partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Frame {
    #[default]
    Running,
    Whole,
}

/// `expr -> name` inside a projection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProjItem {
    pub expr: Expr,
    pub name: String,
}

impl ProjItem {
    pub fn new(expr: Expr, name: impl Into<String>) -> Self {
        ProjItem {
            expr,
            name: name.into(),
        }
    }

    pub fn keep(name: impl Into<String>) -> Self {
        let name = name.into();
        ProjItem {
            expr: Expr::Attr(name.clone()),
            name,
        }
    }

    /// True for `a -> a`.
    pub fn is_passthrough(&self) -> bool {
        self.expr.as_attr() == Some(self.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Operator {
    Relation {
        name: String,
        schema: Schema,
    },
    Select(Expr),
    Project(Vec<ProjItem>),
    /// Equi-join on `left = right` pairs.
    Join(Vec<(String, String)>),
    Cross,
    Union,
    Intersect,
    Diff,
    Agg {
        group_by: Vec<String>,
        aggs: Vec<AggCall>,
    },
    DupElim,
    Window {
        call: AggCall,
        partition_by: Vec<String>,
        order_by: Vec<String>,
        frame: Frame,
    },
}

impl Operator {
    pub fn kind(&self) -> &'static str {
        match self {
            Operator::Relation { .. } => "rel",
            Operator::Select(_) => "select",
            Operator::Project(_) => "project",
            Operator::Join(_) => "join",
            Operator::Cross => "cross",
            Operator::Union => "union",
            Operator::Intersect => "intersect",
            Operator::Diff => "diff",
            Operator::Agg { .. } => "agg",
            Operator::DupElim => "dupelim",
            Operator::Window { .. } => "window",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Operator::Relation { .. } => 0,
            Operator::Select(_)
            | Operator::Project(_)
            | Operator::Agg { .. }
            | Operator::DupElim
            | Operator::Window { .. } => 1,
            _ => 2,
        }
    }

    pub fn is_set_op(&self) -> bool {
        matches!(self, Operator::Union | Operator::Intersect | Operator::Diff)
    }
}
