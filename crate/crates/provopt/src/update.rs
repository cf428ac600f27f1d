//! UPDATE statements for transactions.
//!
//! ```text
//! txn     := [BEGIN ;] { update ; } [COMMIT ;]
//! update  := UPDATE NAME SET NAME = expr { , NAME = expr } [ WHERE expr ]
//! expr    := or
//! or      := and { OR and }
//! and     := not { AND not }
//! not     := NOT not | cmp
//! cmp     := sum [ (= | <> | != | < | <= | > | >=) sum ]
//! sum     := term { (+ | -) term }
//! term    := unary { (* | /) unary }
//! unary   := - unary | atom
//! atom    := NAME | INT | FLOAT | 'text' | TRUE | FALSE | NULL | ( expr )
//!          | CASE WHEN expr THEN expr ELSE expr END
//! ```
//!
//! Keywords are case-insensitive; `--` starts a comment; names may be
//! double-quoted. A missing WHERE clause updates every row.

use provopt_core::algebra::{ArithOp, CmpOp, Expr, Value};
use provopt_core::instrument::Update;

use crate::sexpr::{syntax, Pos, SyntaxError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Int(i64),
    Float(f64),
    Str(String),
    Sym(&'static str),
}

const SYMBOLS: &[&str] = &["<>", "!=", "<=", ">=", "=", "<", ">", "+", "-", "*", "/", "(", ")", ",", ";"];

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
        } else if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
        } else if c == '\'' || c == '"' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None => return Err(syntax(pos, "unterminated quote")),
                    Some(&q) if q == c && chars.get(j + 1) == Some(&c) => {
                        s.push(c);
                        j += 2;
                    }
                    Some(&q) if q == c => break,
                    Some(&q) => {
                        s.push(q);
                        j += 1;
                    }
                }
            }
            let n = j + 1 - i;
            advance(&mut i, &mut line, &mut col, n);
            out.push((if c == '\'' { Tok::Str(s) } else { Tok::Quoted(s) }, pos));
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '.') {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let tok = if s.contains(['.', 'e', 'E']) {
                s.parse().map(Tok::Float).map_err(|_| syntax(pos, format!("bad number `{s}`")))?
            } else {
                s.parse().map(Tok::Int).map_err(|_| syntax(pos, format!("bad number `{s}`")))?
            };
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            out.push((tok, pos));
        } else if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            out.push((Tok::Word(chars[i..j].iter().collect()), pos));
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let sym = SYMBOLS
                .iter()
                .find(|s| rest.starts_with(**s))
                .ok_or_else(|| syntax(pos, format!("unexpected character `{c}`")))?;
            advance(&mut i, &mut line, &mut col, sym.len());
            out.push((Tok::Sym(sym), pos));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.is_kw(kw);
        if hit {
            self.at += 1;
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected {kw}")))
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = matches!(self.peek(), Some(Tok::Sym(x)) if *x == s);
        if hit {
            self.at += 1;
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected `{s}`")))
        }
    }

    fn name(&mut self) -> Result<String, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) if !is_reserved(&w) => {
                self.at += 1;
                Ok(w)
            }
            Some(Tok::Quoted(w)) => {
                self.at += 1;
                Ok(w)
            }
            _ => Err(syntax(self.pos(), "expected a name")),
        }
    }

    fn update(&mut self) -> Result<Update, SyntaxError> {
        self.expect_kw("UPDATE")?;
        let relation = self.name()?;
        self.expect_kw("SET")?;
        let mut set = Vec::new();
        loop {
            let a = self.name()?;
            self.expect_sym("=")?;
            set.push((a, self.expr()?));
            if !self.eat_sym(",") {
                break;
            }
        }
        let condition = if self.eat_kw("WHERE") { self.expr()? } else { Expr::Const(Value::Bool(true)) };
        Ok(Update::new(relation, set, condition))
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut parts = vec![self.and()?];
        while self.eat_kw("OR") {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.remove(0) } else { Expr::or(parts) })
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let mut parts = vec![self.not()?];
        while self.eat_kw("AND") {
            parts.push(self.not()?);
        }
        Ok(if parts.len() == 1 { parts.remove(0) } else { Expr::and(parts) })
    }

    fn not(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_kw("NOT") {
            return Ok(Expr::not(self.not()?));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, SyntaxError> {
        let l = self.sum()?;
        let op = match self.peek() {
            Some(Tok::Sym("=")) => CmpOp::Eq,
            Some(Tok::Sym("<>" | "!=")) => CmpOp::Ne,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            _ => return Ok(l),
        };
        self.at += 1;
        Ok(Expr::cmp(op, l, self.sum()?))
    }

    fn sum(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("+")) => ArithOp::Add,
                Some(Tok::Sym("-")) => ArithOp::Sub,
                _ => return Ok(e),
            };
            self.at += 1;
            e = Expr::arith(op, e, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("*")) => ArithOp::Mul,
                Some(Tok::Sym("/")) => ArithOp::Div,
                _ => return Ok(e),
            };
            self.at += 1;
            e = Expr::arith(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                Expr::Const(Value::Int(i)) => Expr::Const(Value::Int(-i)),
                Expr::Const(Value::Float(f)) => Expr::Const(Value::Float(-f)),
                e => Expr::arith(ArithOp::Sub, Expr::Const(Value::Int(0)), e),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        if self.eat_sym("(") {
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.eat_kw("CASE") {
            self.expect_kw("WHEN")?;
            let c = self.expr()?;
            self.expect_kw("THEN")?;
            let t = self.expr()?;
            self.expect_kw("ELSE")?;
            let f = self.expr()?;
            self.expect_kw("END")?;
            return Ok(Expr::if_then_else(c, t, f));
        }
        for (kw, v) in [("TRUE", Value::Bool(true)), ("FALSE", Value::Bool(false)), ("NULL", Value::Null)] {
            if self.eat_kw(kw) {
                return Ok(Expr::Const(v));
            }
        }
        let e = match self.peek().cloned() {
            Some(Tok::Int(i)) => Expr::Const(Value::Int(i)),
            Some(Tok::Float(f)) => Expr::Const(Value::Float(f)),
            Some(Tok::Str(s)) => Expr::Const(Value::Str(s)),
            Some(Tok::Word(_) | Tok::Quoted(_)) => return self.name().map(Expr::Attr),
            _ => return Err(syntax(pos, "expected an expression")),
        };
        self.at += 1;
        Ok(e)
    }
}

const RESERVED: &[&str] = &[
    "update", "set", "where", "and", "or", "not", "case", "when", "then", "else", "end", "true", "false", "null",
    "begin", "commit",
];

fn is_reserved(w: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(w))
}

/// Parse the updates of one transaction.
pub fn parse_updates(text: &str) -> Result<Vec<Update>, SyntaxError> {
    let toks = lex(text)?;
    let end = Pos { line: text.lines().count().max(1), col: text.lines().last().map_or(1, |l| l.chars().count() + 1) };
    let mut p = Parser { toks, at: 0, end };
    if p.eat_kw("BEGIN") {
        p.eat_sym(";");
    }
    let mut out = Vec::new();
    while p.peek().is_some() {
        if p.eat_kw("COMMIT") {
            p.eat_sym(";");
            if p.peek().is_some() {
                return Err(syntax(p.pos(), "statements after COMMIT"));
            }
            break;
        }
        out.push(p.update()?);
        if !p.eat_sym(";") && p.peek().is_some() && !p.is_kw("COMMIT") {
            return Err(syntax(p.pos(), "expected `;`"));
        }
    }
    Ok(out)
}
