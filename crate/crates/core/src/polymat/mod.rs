//! Exact sparse multivariate polynomials over the rationals, and dense
//! matrices of them.
//!
//! Everything in this module is exact: coefficients are arbitrary-precision
//! rationals and no floating point is involved in any algebraic operation.
//! Conversions to `f64` exist only as explicit exits for downstream numerics.

mod index;
mod matrix;
mod poly;
mod ratmat;

pub use index::MultiIndex;
pub use matrix::{CharPoly, PolyMatrix};
pub use poly::Poly;
pub use ratmat::RatMatrix;

use num::{BigInt, BigRational, One, Signed, Zero};
use thiserror::Error;

/// Arbitrary-precision rational number used for every coefficient.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("variable count mismatch: {left} vs {right}")]
    NvarsMismatch { left: usize, right: usize },
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("minor order {order} out of range (max {max})")]
    MinorOrder { order: usize, max: usize },
    #[error("evaluation point has length {got}, expected {expected}")]
    PointLength { expected: usize, got: usize },
    #[error("matrix has {got} entries, expected {expected}")]
    EntryCount { expected: usize, got: usize },
}

/// Shorthand for the rational `num / den`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Shorthand for an integer-valued rational.
pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Parses `p/q` or `p` (optionally signed) into a rational in lowest terms.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num.parse().ok()?;
    let den: BigInt = den.parse().ok()?;
    if den.is_zero() {
        return None;
    }
    Some(Rational::new(num, den))
}

/// Canonical text form: integers plain, otherwise `p/q` in lowest terms with
/// a positive denominator.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Nearest `f64` to an exact rational.
pub fn rational_to_f64(value: &Rational) -> f64 {
    use num::ToPrimitive;
    match value.to_f64() {
        Some(v) if v.is_finite() => v,
        _ => {
            // Fall back to a scaled division for huge numerators/denominators.
            let n = value.numer();
            let d = value.denom();
            let shift = n.bits().max(d.bits()).saturating_sub(1000);
            let ns = (n >> shift).to_f64().unwrap_or(f64::NAN);
            let ds = (d >> shift).to_f64().unwrap_or(f64::NAN);
            ns / ds
        }
    }
}

/// Positive gcd of a set of rationals: gcd of numerators over lcm of
/// denominators. Returns one for an empty (or all-zero) set.
pub fn rational_gcd<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    use num::Integer;
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for v in values {
        if v.is_zero() {
            continue;
        }
        num = num.gcd(v.numer());
        den = den.lcm(v.denom());
    }
    if num.is_zero() {
        Rational::one()
    } else {
        Rational::new(num.abs(), den)
    }
}
