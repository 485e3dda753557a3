//! Hand-rolled SMT-LIB v2 lexer with line/column tracking.

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    LParen,
    RParen,
    /// simple or |quoted| symbol, stored decoded
    Sym(String),
    /// keyword without the leading ':'
    Kw(String),
    Num(String),
    Dec(String),
    /// hex digits after #x, lowercased
    Hex(String),
    /// binary digits after #b
    Bin(String),
    /// decoded string literal
    Str(String),
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

fn is_simple_symbol_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b"~!@$%^&*_-+=<>.?/".contains(&b)
}

fn is_simple_symbol_start(b: u8) -> bool {
    is_simple_symbol_byte(b) && !b.is_ascii_digit()
}

impl<'a> Lexer<'a> {
    pub fn new(text: &'a str) -> Self {
        Lexer {
            bytes: text.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b';') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> String {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if !pred(b) {
                break;
            }
            self.bump();
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }

    pub fn next_token(&mut self) -> Result<Option<Token>> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let err = |msg: String| Error::parse(line, col, msg);
        let Some(b) = self.peek() else {
            return Ok(None);
        };
        let tok = match b {
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b'"' => {
                self.bump();
                let mut out = String::new();
                loop {
                    match self.bump() {
                        None => return Err(err("unterminated string literal".into())),
                        Some(b'"') => {
                            // "" inside a literal is an escaped quote
                            if self.peek() == Some(b'"') {
                                self.bump();
                                out.push('"');
                            } else {
                                break;
                            }
                        }
                        Some(c) => out.push(c as char),
                    }
                }
                Tok::Str(out)
            }
            b'|' => {
                self.bump();
                let mut out = String::new();
                loop {
                    match self.bump() {
                        None => return Err(err("unterminated quoted symbol".into())),
                        Some(b'|') => break,
                        Some(b'\\') => {
                            return Err(err("backslash is not allowed in quoted symbols".into()))
                        }
                        Some(c) => out.push(c as char),
                    }
                }
                Tok::Sym(out)
            }
            b':' => {
                self.bump();
                let name = self.take_while(is_simple_symbol_byte);
                if name.is_empty() {
                    return Err(err("empty keyword".into()));
                }
                Tok::Kw(name)
            }
            b'#' => {
                self.bump();
                match self.bump() {
                    Some(b'x') => {
                        let digits = self.take_while(|b| b.is_ascii_hexdigit());
                        if digits.is_empty() {
                            return Err(err("empty hexadecimal literal".into()));
                        }
                        Tok::Hex(digits.to_ascii_lowercase())
                    }
                    Some(b'b') => {
                        let digits = self.take_while(|b| b == b'0' || b == b'1');
                        if digits.is_empty() {
                            return Err(err("empty binary literal".into()));
                        }
                        Tok::Bin(digits)
                    }
                    other => {
                        return Err(err(format!(
                            "expected #x or #b literal, found #{}",
                            other.map(|c| (c as char).to_string()).unwrap_or_default()
                        )))
                    }
                }
            }
            b if b.is_ascii_digit() => {
                let int = self.take_while(|b| b.is_ascii_digit());
                if self.peek() == Some(b'.') {
                    self.bump();
                    let frac = self.take_while(|b| b.is_ascii_digit());
                    if frac.is_empty() {
                        return Err(err("decimal literal missing fractional digits".into()));
                    }
                    Tok::Dec(format!("{int}.{frac}"))
                } else {
                    Tok::Num(int)
                }
            }
            b if is_simple_symbol_start(b) => Tok::Sym(self.take_while(is_simple_symbol_byte)),
            other => {
                return Err(err(format!(
                    "unexpected character {:?}",
                    other as char
                )))
            }
        };
        Ok(Some(Token { tok, line, col }))
    }
}

/// True when a decoded symbol can be printed without |...| quoting.
pub fn is_simple_symbol(s: &str) -> bool {
    let bytes = s.as_bytes();
    match bytes.first() {
        None => false,
        Some(&b) if !is_simple_symbol_start(b) => false,
        _ => bytes.iter().all(|&b| is_simple_symbol_byte(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex_all(text: &str) -> Vec<Tok> {
        let mut lx = Lexer::new(text);
        let mut out = Vec::new();
        while let Some(t) = lx.next_token().unwrap() {
            out.push(t.tok);
        }
        out
    }

    #[test]
    fn lexes_a_small_command() {
        let toks = lex_all("(assert (= x #x1F))");
        assert_eq!(
            toks,
            vec![
                Tok::LParen,
                Tok::Sym("assert".into()),
                Tok::LParen,
                Tok::Sym("=".into()),
                Tok::Sym("x".into()),
                Tok::Hex("1f".into()),
                Tok::RParen,
                Tok::RParen,
            ]
        );
    }

    #[test]
    fn tracks_line_and_column() {
        let mut lx = Lexer::new("(a\n  bc)");
        lx.next_token().unwrap();
        lx.next_token().unwrap();
        let t = lx.next_token().unwrap().unwrap();
        assert_eq!((t.line, t.col), (2, 3));
    }

    #[test]
    fn comments_run_to_end_of_line() {
        let toks = lex_all("; a comment (not tokens)\nfoo ; trailing\nbar");
        assert_eq!(toks, vec![Tok::Sym("foo".into()), Tok::Sym("bar".into())]);
    }

    #[test]
    fn string_quote_escaping_decodes() {
        let toks = lex_all(r#""he said ""hi""""#);
        assert_eq!(toks, vec![Tok::Str(r#"he said "hi""#.into())]);
    }

    #[test]
    fn quoted_symbols_keep_odd_characters() {
        let toks = lex_all("|hello world()|");
        assert_eq!(toks, vec![Tok::Sym("hello world()".into())]);
        assert!(!is_simple_symbol("hello world()"));
        assert!(is_simple_symbol("str.in_re"));
        assert!(!is_simple_symbol("0abc"));
    }

    #[test]
    fn decimals_and_numerals_are_distinct() {
        assert_eq!(
            lex_all("1 1.5 007"),
            vec![
                Tok::Num("1".into()),
                Tok::Dec("1.5".into()),
                Tok::Num("007".into())
            ]
        );
    }

    #[test]
    fn keywords_carry_their_name() {
        assert_eq!(
            lex_all(":named :weight"),
            vec![Tok::Kw("named".into()), Tok::Kw("weight".into())]
        );
    }

    #[test]
    fn rejects_garbage_bytes() {
        let mut lx = Lexer::new("[");
        assert!(lx.next_token().is_err());
    }
}
