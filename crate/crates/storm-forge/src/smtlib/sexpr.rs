//! Generic s-expressions: the staging representation between the lexer and
//! the command parser, and the verbatim form for passthrough commands,
//! annotation attribute values, and solver model output.

use std::fmt;

use crate::error::{Error, Result};

use super::lexer::{is_simple_symbol, Lexer, Tok};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Atom {
    Sym(String),
    Kw(String),
    Num(String),
    Dec(String),
    Hex(String),
    Bin(String),
    Str(String),
}

#[derive(Clone, Debug)]
pub struct SExpr {
    pub kind: SExprKind,
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, Debug)]
pub enum SExprKind {
    Atom(Atom),
    List(Vec<SExpr>),
}

// positions are diagnostics, not content: two parses of the same text from
// different offsets must still compare equal
impl PartialEq for SExpr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (SExprKind::Atom(a), SExprKind::Atom(b)) => a == b,
            (SExprKind::List(a), SExprKind::List(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for SExpr {}

impl SExpr {
    pub fn as_atom(&self) -> Option<&Atom> {
        match &self.kind {
            SExprKind::Atom(a) => Some(a),
            SExprKind::List(_) => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self.as_atom() {
            Some(Atom::Sym(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match &self.kind {
            SExprKind::Atom(_) => None,
            SExprKind::List(items) => Some(items),
        }
    }

    /// Head symbol of a list form, e.g. "assert" for (assert ...).
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_sym()
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(self.line, self.col, message.into())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Sym(s) => {
                if is_simple_symbol(s) {
                    f.write_str(s)
                } else {
                    write!(f, "|{s}|")
                }
            }
            Atom::Kw(k) => write!(f, ":{k}"),
            Atom::Num(n) => f.write_str(n),
            Atom::Dec(d) => f.write_str(d),
            Atom::Hex(h) => write!(f, "#x{h}"),
            Atom::Bin(b) => write!(f, "#b{b}"),
            Atom::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SExprKind::Atom(a) => a.fmt(f),
            SExprKind::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    item.fmt(f)?;
                }
                f.write_str(")")
            }
        }
    }
}

pub struct SExprReader<'a> {
    lexer: Lexer<'a>,
}

impl<'a> SExprReader<'a> {
    pub fn new(text: &'a str) -> Self {
        SExprReader {
            lexer: Lexer::new(text),
        }
    }

    /// Next complete s-expression, or None at end of input.
    pub fn next(&mut self) -> Result<Option<SExpr>> {
        let Some(token) = self.lexer.next_token()? else {
            return Ok(None);
        };
        self.finish(token)
    }

    fn finish(&mut self, token: super::lexer::Token) -> Result<Option<SExpr>> {
        let (line, col) = (token.line, token.col);
        let kind = match token.tok {
            Tok::RParen => {
                return Err(Error::parse(line, col, "unbalanced ')'"));
            }
            Tok::LParen => {
                let mut items = Vec::new();
                loop {
                    let Some(tok) = self.lexer.next_token()? else {
                        return Err(Error::parse(line, col, "unclosed '('"));
                    };
                    if matches!(tok.tok, Tok::RParen) {
                        break;
                    }
                    match self.finish(tok)? {
                        Some(sx) => items.push(sx),
                        None => unreachable!("finish only returns None at EOF"),
                    }
                }
                SExprKind::List(items)
            }
            Tok::Sym(s) => SExprKind::Atom(Atom::Sym(s)),
            Tok::Kw(s) => SExprKind::Atom(Atom::Kw(s)),
            Tok::Num(s) => SExprKind::Atom(Atom::Num(s)),
            Tok::Dec(s) => SExprKind::Atom(Atom::Dec(s)),
            Tok::Hex(s) => SExprKind::Atom(Atom::Hex(s)),
            Tok::Bin(s) => SExprKind::Atom(Atom::Bin(s)),
            Tok::Str(s) => SExprKind::Atom(Atom::Str(s)),
        };
        Ok(Some(SExpr { kind, line, col }))
    }

    /// All remaining s-expressions.
    pub fn read_all(&mut self) -> Result<Vec<SExpr>> {
        let mut out = Vec::new();
        while let Some(sx) = self.next()? {
            out.push(sx);
        }
        Ok(out)
    }
}

/// Parse a whole string of s-expressions.
pub fn parse_sexprs(text: &str) -> Result<Vec<SExpr>> {
    SExprReader::new(text).read_all()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists() {
        let all = parse_sexprs("(a (b c) ()) d").unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].head(), Some("a"));
        assert_eq!(all[0].as_list().unwrap().len(), 3);
        assert_eq!(all[1].as_sym(), Some("d"));
    }

    #[test]
    fn display_round_trips_structurally() {
        let text = r#"(set-info :source "a ""b"" c") (foo |odd name| #x0a 1.5 #b101)"#;
        let once = parse_sexprs(text).unwrap();
        let printed = once
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let twice = parse_sexprs(&printed).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn unbalanced_parens_error_with_position() {
        let err = parse_sexprs("(a (b)").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("1:1"), "position missing in: {msg}");
    }

    #[test]
    fn equality_ignores_positions() {
        let a = &parse_sexprs("(x y)").unwrap()[0];
        let b = &parse_sexprs("\n   (x y)").unwrap()[0];
        assert_eq!(a, b);
    }
}
