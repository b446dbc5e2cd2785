//! Coefficient and right-hand-side functions of `(x, y, t)`.
//!
//! Expressions are small arithmetic trees parsed from text. The function set
//! is `sin`, `cos`, `exp`; adding one means a [`Func`] variant plus a line in
//! the parser's `atom` rule.

mod parser;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use parser::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Pi,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{subtree}`{}", ctx(.context))]
    DivisionByZero { subtree: String, context: Option<String> },
    #[error("domain error in `{subtree}`: {detail}{}", ctx(.context))]
    Domain { subtree: String, detail: String, context: Option<String> },
    #[error("non-finite value in `{subtree}`{}", ctx(.context))]
    NonFinite { subtree: String, context: Option<String> },
}

fn ctx(c: &Option<String>) -> String {
    c.as_ref().map(|c| format!(" at {c}")).unwrap_or_default()
}

impl EvalError {
    pub fn with_context(mut self, where_: String) -> Self {
        match &mut self {
            EvalError::DivisionByZero { context, .. }
            | EvalError::Domain { context, .. }
            | EvalError::NonFinite { context, .. } => *context = Some(where_),
        }
        self
    }

    pub fn subtree(&self) -> &str {
        match self {
            EvalError::DivisionByZero { subtree, .. }
            | EvalError::Domain { subtree, .. }
            | EvalError::NonFinite { subtree, .. } => subtree,
        }
    }
}

/// Integer exponents up to this magnitude use repeated multiplication.
const SMALL_INT_POW: f64 = 64.0;

/// Parses expression text.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    parser::parse(src)
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Num(0.0)
    }

    pub fn constant(v: f64) -> Self {
        Expr::Num(v)
    }

    /// Literal zero: the tree is the number 0 (possibly negated).
    pub fn is_literal_zero(&self) -> bool {
        match self {
            Expr::Num(v) => *v == 0.0,
            Expr::Neg(inner) => inner.is_literal_zero(),
            _ => false,
        }
    }

    pub fn uses_var(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::Pi => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_var(var),
            Expr::Binary(_, a, b) => a.uses_var(var) || b.uses_var(var),
        }
    }

    /// Value of a variable-free tree, if it evaluates cleanly.
    pub fn constant_value(&self) -> Option<f64> {
        if self.uses_var(Var::X) || self.uses_var(Var::Y) || self.uses_var(Var::T) {
            return None;
        }
        self.eval(0.0, 0.0, 0.0).ok()
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => PI,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::T) => t,
            Expr::Neg(a) => -a.eval(x, y, t)?,
            Expr::Call(f, a) => {
                let a = a.eval(x, y, t)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, y, t)?;
                let b = b.eval(x, y, t)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero {
                                subtree: self.to_string(),
                                context: None,
                            });
                        }
                        a / b
                    }
                    BinOp::Pow => self.pow(a, b)?,
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { subtree: self.to_string(), context: None })
        }
    }

    fn pow(&self, base: f64, exponent: f64) -> Result<f64, EvalError> {
        if exponent.fract() == 0.0 && exponent.abs() <= SMALL_INT_POW {
            let mut acc = 1.0;
            for _ in 0..exponent.abs() as u32 {
                acc *= base;
            }
            if exponent < 0.0 {
                if acc == 0.0 {
                    return Err(EvalError::DivisionByZero { subtree: self.to_string(), context: None });
                }
                acc = 1.0 / acc;
            }
            return Ok(acc);
        }
        if base > 0.0 {
            Ok((exponent * base.ln()).exp())
        } else if base == 0.0 && exponent > 0.0 {
            Ok(0.0)
        } else if base == 0.0 {
            Err(EvalError::DivisionByZero { subtree: self.to_string(), context: None })
        } else if exponent.fract() == 0.0 {
            Ok(base.powf(exponent))
        } else {
            Err(EvalError::Domain {
                subtree: self.to_string(),
                detail: format!("negative base {base} with non-integer exponent {exponent}"),
                context: None,
            })
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            // negative literals only come from programmatic construction
            Expr::Num(v) if v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Canonical text; re-parses to a structurally equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                };
                write!(f, "{name}({a})")
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_operand(f, a, a.precedence() < 3)
            }
            Expr::Binary(BinOp::Pow, a, b) => {
                write_operand(f, a, a.precedence() < 5)?;
                f.write_str("^")?;
                write_operand(f, b, b.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let (sym, p) = match op {
                    BinOp::Add => (" + ", 1),
                    BinOp::Sub => (" - ", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => unreachable!(),
                };
                write_operand(f, a, a.precedence() < p)?;
                f.write_str(sym)?;
                write_operand(f, b, b.precedence() <= p)
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Radical-inverse in the given base; the building block of Halton points.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut acc = 0.0;
    let mut scale = inv;
    while i > 0 {
        acc += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    acc
}

/// Checks `e(x, y+Y, t)`, `e(x, y, t+T)` and `e(x, y+Y, t+T)` against
/// `e(x, y, t)` at `samples` Halton points of `[0,1]×[0,Y)×[0,T)`.
///
/// A point passes when every shifted value is within `tol·(1 + |e(x,y,t)|)`.
pub fn check_periodicity(
    e: &Expr,
    period_y: f64,
    period_t: f64,
    samples: usize,
    tol: f64,
) -> Result<bool, EvalError> {
    assert!(samples >= 8, "periodicity check needs at least 8 samples");
    for i in 1..=samples as u64 {
        let x = radical_inverse(i, 2);
        let y = radical_inverse(i, 3) * period_y;
        let t = radical_inverse(i, 5) * period_t;
        let base = e.eval(x, y, t)?;
        let bound = tol * (1.0 + base.abs());
        for (dy, dt) in [(period_y, 0.0), (0.0, period_t), (period_y, period_t)] {
            let shifted = e.eval(x, y + dy, t + dt)?;
            // NaN-safe: a failed comparison counts as a violation
            if !((shifted - base).abs() <= bound) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
