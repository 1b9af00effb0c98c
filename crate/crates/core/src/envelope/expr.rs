//! Integrand expressions.
//!
//! ```text
//! expr    = term { ("+" | "-") term }
//! term    = unary { ("*" | "/") unary }        divisors must be constant
//! unary   = "-" unary | power
//! power   = atom [ "^" integer ]
//! atom    = number | "w" integer | builtin | "(" expr ")"
//! builtin = "sqnorm" | "neg_sqnorm" | "det2" | "quadratic" "(" matrix ")"
//! matrix  = "[" row { "," row } "]"
//! row     = "[" signed { "," signed } "]"
//! signed  = [ "-" ] number [ "/" number ]
//! number  = digits [ "." digits ]
//! ```
//!
//! Variables `w1 … wd` are the fiber components. `det2` reads a 4-component
//! fiber as a row-major 2×2 matrix.

use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::afree::TestFunction;
use crate::polymat::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("integrand needs {needed} fiber components, got {got}")]
    Dimension { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Const(Rational),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Rational),
    Pow(Box<Expr>, u32),
    SqNorm,
    NegSqNorm,
    Det2,
    Quadratic(Vec<Vec<Rational>>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Sym(char),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut value: Rational = text[start..i].parse::<num::BigInt>().expect("digits").into();
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let frac = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if frac == i {
                    return Err(ExprError::Syntax {
                        offset: frac - 1,
                        message: "expected digits after `.`".into(),
                    });
                }
                let digits: num::BigInt = text[frac..i].parse().expect("digits");
                let scale = num::BigInt::from(10).pow((i - frac) as u32);
                value += Rational::new(digits, scale);
            }
            out.push((start, Tok::Num(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if "+-*/^()[],".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ExprError::Syntax {
                offset: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    /// Offset of the current token, or of the last one at end of input.
    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.0)
            .unwrap_or(0)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else if self.peek().is_none() {
            self.err(format!("expected `{c}`, found end of input"))
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                let at = self.offset();
                let rhs = self.unary()?;
                match constant_value(&rhs) {
                    Some(c) if !c.is_zero() => lhs = Expr::Div(Box::new(lhs), c),
                    Some(_) => {
                        return Err(ExprError::Syntax {
                            offset: at,
                            message: "division by zero".into(),
                        })
                    }
                    None => {
                        return Err(ExprError::Syntax {
                            offset: at,
                            message: "divisor must be a constant".into(),
                        })
                    }
                }
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            match self.peek().cloned() {
                Some(Tok::Num(v)) if v.is_integer() && !v.is_negative() => {
                    self.pos += 1;
                    let e = v.to_integer().to_u32().ok_or(ExprError::Syntax {
                        offset: self.toks[self.pos - 1].0,
                        message: "exponent too large".into(),
                    })?;
                    return Ok(Expr::Pow(Box::new(base), e));
                }
                _ => return self.err("expected a nonnegative integer exponent"),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.peek().cloned() {
            None => self.err("unexpected end of input"),
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Sym(c)) => self.err(format!("unexpected `{c}`")),
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "sqnorm" => Ok(Expr::SqNorm),
                    "neg_sqnorm" => Ok(Expr::NegSqNorm),
                    "det2" => Ok(Expr::Det2),
                    "quadratic" => {
                        self.expect('(')?;
                        let m = self.matrix()?;
                        self.expect(')')?;
                        Ok(Expr::Quadratic(m))
                    }
                    _ => match name.strip_prefix('w').and_then(|k| k.parse::<usize>().ok()) {
                        Some(k) if k >= 1 && !name[1..].starts_with('0') => Ok(Expr::Var(k - 1)),
                        _ => Err(ExprError::UnknownIdentifier { name, offset }),
                    },
                }
            }
        }
    }

    fn signed(&mut self) -> Result<Rational, ExprError> {
        let neg = self.eat('-');
        let Some(Tok::Num(mut v)) = self.peek().cloned() else {
            return self.err("expected a number");
        };
        self.pos += 1;
        if self.eat('/') {
            match self.peek().cloned() {
                Some(Tok::Num(d)) if !d.is_zero() => {
                    self.pos += 1;
                    v /= d;
                }
                _ => return self.err("expected a nonzero denominator"),
            }
        }
        Ok(if neg { -v } else { v })
    }

    fn matrix(&mut self) -> Result<Vec<Vec<Rational>>, ExprError> {
        self.expect('[')?;
        let mut rows = Vec::new();
        loop {
            self.expect('[')?;
            let mut row = vec![self.signed()?];
            while self.eat(',') {
                row.push(self.signed()?);
            }
            self.expect(']')?;
            rows.push(row);
            if !self.eat(',') {
                break;
            }
        }
        self.expect(']')?;
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return self.err("quadratic form matrix must be square");
        }
        Ok(rows)
    }
}

fn constant_value(e: &Expr) -> Option<Rational> {
    Some(match e {
        Expr::Const(v) => v.clone(),
        Expr::Neg(a) => -constant_value(a)?,
        Expr::Add(a, b) => constant_value(a)? + constant_value(b)?,
        Expr::Sub(a, b) => constant_value(a)? - constant_value(b)?,
        Expr::Mul(a, b) => constant_value(a)? * constant_value(b)?,
        Expr::Div(a, c) => constant_value(a)? / c,
        Expr::Pow(a, k) => num::pow(constant_value(a)?, *k as usize),
        _ => return None,
    })
}

/// Ring operations shared by exact and floating evaluation.
trait Scalar: Clone + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + std::ops::Mul<Output = Self> + std::ops::Neg<Output = Self> {
    fn from_rational(r: &Rational) -> Self;
    fn zero() -> Self;
    fn one() -> Self;
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        crate::polymat::rational_to_f64(r)
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
}

fn eval<T: Scalar>(e: &Expr, w: &[T]) -> T {
    match e {
        Expr::Const(v) => T::from_rational(v),
        Expr::Var(k) => w[*k].clone(),
        Expr::Neg(a) => -eval(a, w),
        Expr::Add(a, b) => eval(a, w) + eval(b, w),
        Expr::Sub(a, b) => eval(a, w) - eval(b, w),
        Expr::Mul(a, b) => eval(a, w) * eval(b, w),
        Expr::Div(a, c) => eval(a, w) * T::from_rational(&c.recip()),
        Expr::Pow(a, k) => {
            let base = eval(a, w);
            (0..*k).fold(T::one(), |acc, _| acc * base.clone())
        }
        Expr::SqNorm => w.iter().fold(T::zero(), |acc, x| acc + x.clone() * x.clone()),
        Expr::NegSqNorm => -w.iter().fold(T::zero(), |acc, x| acc + x.clone() * x.clone()),
        Expr::Det2 => w[0].clone() * w[3].clone() - w[1].clone() * w[2].clone(),
        Expr::Quadratic(q) => {
            let mut acc = T::zero();
            for (i, row) in q.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    acc = acc + T::from_rational(c) * w[i].clone() * w[j].clone();
                }
            }
            acc
        }
    }
}

/// Polynomial degree of the expression, used as the declared growth exponent.
fn degree(e: &Expr) -> u32 {
    match e {
        Expr::Const(_) => 0,
        Expr::Var(_) => 1,
        Expr::Neg(a) | Expr::Div(a, _) => degree(a),
        Expr::Add(a, b) | Expr::Sub(a, b) => degree(a).max(degree(b)),
        Expr::Mul(a, b) => degree(a) + degree(b),
        Expr::Pow(a, k) => degree(a) * k,
        Expr::SqNorm | Expr::NegSqNorm | Expr::Det2 | Expr::Quadratic(_) => 2,
    }
}

/// `(fixed dimension, minimum dimension)` implied by the expression.
fn dims(e: &Expr) -> (Option<usize>, usize) {
    let merge = |a: (Option<usize>, usize), b: (Option<usize>, usize)| (a.0.or(b.0), a.1.max(b.1));
    match e {
        Expr::Const(_) | Expr::SqNorm | Expr::NegSqNorm => (None, 0),
        Expr::Var(k) => (None, k + 1),
        Expr::Neg(a) | Expr::Div(a, _) | Expr::Pow(a, _) => dims(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => merge(dims(a), dims(b)),
        Expr::Det2 => (Some(4), 4),
        Expr::Quadratic(q) => (Some(q.len()), q.len()),
    }
}

/// A parsed integrand `f: W → R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrand {
    name: String,
    expr: Expr,
    growth: u32,
    fixed_dim: Option<usize>,
    min_dim: usize,
}

impl Integrand {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let toks = lex(text)?;
        if toks.is_empty() {
            return Err(ExprError::Syntax {
                offset: 0,
                message: "empty expression".into(),
            });
        }
        let mut p = Parser { toks, pos: 0 };
        let expr = p.expr()?;
        if p.pos < p.toks.len() {
            return p.err("unexpected trailing input");
        }
        let (fixed_dim, min_dim) = dims(&expr);
        if let Some(fd) = fixed_dim {
            if min_dim > fd {
                return Err(ExprError::Dimension { needed: min_dim, got: fd });
            }
        }
        Ok(Integrand {
            name: text.trim().to_string(),
            growth: degree(&expr),
            expr,
            fixed_dim,
            min_dim,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Declared growth exponent `p` in `|f(w)| ≤ c(1 + |w|^p)`.
    pub fn growth(&self) -> u32 {
        self.growth
    }

    pub fn check_dim(&self, d: usize) -> Result<(), ExprError> {
        let needed = self.fixed_dim.unwrap_or(self.min_dim);
        if d < self.min_dim || self.fixed_dim.is_some_and(|fd| fd != d) {
            return Err(ExprError::Dimension { needed, got: d });
        }
        Ok(())
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        eval(&self.expr, w)
    }

    pub fn eval_exact(&self, w: &[Rational]) -> Rational {
        eval(&self.expr, w)
    }
}

impl TestFunction for Integrand {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn eval(&self, w: &[f64]) -> f64 {
        Integrand::eval(self, w)
    }
}

pub fn parse_integrand(text: &str) -> Result<Integrand, ExprError> {
    Integrand::parse(text)
}
