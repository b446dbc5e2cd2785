//! Recursive-descent parser for coefficient expressions.
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! additive       := multiplicative (('+' | '-') multiplicative)*
//! multiplicative := unary (('*' | '/') unary)*
//! unary          := '-' unary | power
//! power          := atom ('^' unary)?
//! atom           := number | 'x' | 'y' | 't' | 'pi'
//!                 | ('sin' | 'cos' | 'exp') '(' additive ')'
//!                 | '(' additive ')'
//! ```
//!
//! Unary minus binds looser than `^`, so `-2^2` is `-(2^2)`. The exponent is
//! parsed as `unary`, which makes `^` right-associative and admits `2^-1`.

use std::fmt;

use thiserror::Error;

use super::{BinOp, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at byte {offset}: found {found}, expected one of: {}", .expected.join(", "))]
pub struct ParseError {
    pub offset: usize,
    pub found: String,
    pub expected: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier '{s}'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::Caret => f.write_str("'^'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

const ATOM_START: &[&str] = &["number", "x", "y", "t", "pi", "sin", "cos", "exp", "'('", "'-'"];

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i);
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    found: format!("malformed number '{text}'"),
                    expected: vec!["number"],
                })?;
                if !value.is_finite() {
                    return Err(ParseError {
                        offset: start,
                        found: format!("non-finite number '{text}'"),
                        expected: vec!["finite number"],
                    });
                }
                out.push((start, Tok::Num(value)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    found: format!("character '{ch}'"),
                    expected: ATOM_START.to_vec(),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
    }
    // exponent only when followed by digits, so "2e" stays a syntax error downstream
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            found: self.peek().to_string(),
            expected: expected.to_vec(),
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.additive()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let simple = match name.as_str() {
                    "x" => Some(Expr::Var(Var::X)),
                    "y" => Some(Expr::Var(Var::Y)),
                    "t" => Some(Expr::Var(Var::T)),
                    "pi" => Some(Expr::Pi),
                    _ => None,
                };
                if let Some(e) = simple {
                    self.bump();
                    return Ok(e);
                }
                let func = match name.as_str() {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    _ => return Err(self.error(ATOM_START)),
                };
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Err(self.error(&["'('"]));
                }
                self.bump();
                let arg = self.additive()?;
                self.expect_rparen()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.error(ATOM_START)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&["')'", "'+'", "'-'", "'*'", "'/'", "'^'"]))
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.additive()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["end of input", "'+'", "'-'", "'*'", "'/'", "'^'"]));
    }
    Ok(e)
}
