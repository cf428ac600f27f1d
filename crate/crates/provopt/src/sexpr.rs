//! Tokenizer and reader for parenthesized prefix text.

use std::fmt;

/// Line and column, both from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    /// Bare word, number or operator.
    Symbol(String, Pos),
    /// `"..."`: a name that is not a plain word.
    Quoted(String, Pos),
    /// `'...'`: a string constant.
    Str(String, Pos),
    List(Vec<Sexp>, Pos),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {msg}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub msg: String,
}

pub fn syntax(pos: Pos, msg: impl Into<String>) -> SyntaxError {
    SyntaxError { pos, msg: msg.into() }
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Symbol(_, p) | Sexp::Quoted(_, p) | Sexp::Str(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn symbol(&self) -> Option<&str> {
        match self {
            Sexp::Symbol(s, _) => Some(s),
            _ => None,
        }
    }

    /// A symbol or quoted name.
    pub fn name(&self) -> Option<&str> {
        match self {
            Sexp::Symbol(s, _) | Sexp::Quoted(s, _) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            _ => None,
        }
    }

    /// Head symbol of a list.
    pub fn head(&self) -> Option<&str> {
        self.list()?.first()?.symbol()
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl Reader<'_> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn skip_blank(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while self.chars.peek().is_some_and(|&c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn quoted(&mut self, q: char, start: Pos) -> Result<String, SyntaxError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(syntax(start, "unterminated quote")),
                Some(c) if c == q => {
                    // A doubled quote stands for itself.
                    if self.chars.peek() == Some(&q) {
                        self.bump();
                        s.push(q);
                    } else {
                        return Ok(s);
                    }
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn read(&mut self) -> Result<Option<Sexp>, SyntaxError> {
        self.skip_blank();
        let start = self.pos;
        let Some(c) = self.bump() else { return Ok(None) };
        Ok(Some(match c {
            '(' => {
                let mut items = Vec::new();
                loop {
                    self.skip_blank();
                    match self.chars.peek() {
                        None => return Err(syntax(start, "unclosed parenthesis")),
                        Some(')') => {
                            self.bump();
                            break;
                        }
                        Some(_) => items.push(self.read()?.expect("input remains")),
                    }
                }
                Sexp::List(items, start)
            }
            ')' => return Err(syntax(start, "unexpected `)`")),
            '"' => Sexp::Quoted(self.quoted('"', start)?, start),
            '\'' => Sexp::Str(self.quoted('\'', start)?, start),
            c => {
                let mut s = String::from(c);
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '"' | '\'' | ';') {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Sexp::Symbol(s, start)
            }
        }))
    }
}

/// Read every top-level form of `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, SyntaxError> {
    let mut r = Reader { chars: text.chars().peekable(), pos: Pos { line: 1, col: 1 } };
    let mut out = Vec::new();
    while let Some(x) = r.read()? {
        out.push(x);
    }
    Ok(out)
}

/// Read exactly one form.
pub fn read_one(text: &str) -> Result<Sexp, SyntaxError> {
    let mut forms = read_all(text)?;
    match forms.len() {
        0 => Err(syntax(Pos { line: 1, col: 1 }, "empty input")),
        1 => Ok(forms.remove(0)),
        _ => Err(syntax(forms[1].pos(), "more than one top-level form")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_quotes() {
        let x = read_one("; note\n(a 'it''s' \"x y\"\n  (b -2))").unwrap();
        let items = x.list().unwrap();
        assert_eq!(x.pos(), Pos { line: 2, col: 1 });
        assert_eq!(items[1], Sexp::Str("it's".into(), Pos { line: 2, col: 4 }));
        assert_eq!(items[2].name(), Some("x y"));
        assert_eq!(items[3].pos(), Pos { line: 3, col: 3 });
        assert_eq!(items[3].list().unwrap()[1].symbol(), Some("-2"));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(read_one("(a\n (b)").unwrap_err().pos, Pos { line: 1, col: 1 });
        assert_eq!(read_one("a b").unwrap_err().msg, "more than one top-level form");
        assert_eq!(read_one("a )").unwrap_err().msg, "unexpected `)`");
        assert_eq!(read_one("  ").unwrap_err().msg, "empty input");
    }
}
