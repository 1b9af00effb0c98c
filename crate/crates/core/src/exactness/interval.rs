//! Outward-rounded interval arithmetic, just enough to bound a polynomial
//! over a box.

use num::Zero;

use crate::polymat::{rational_to_f64, Poly, Rational};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "[{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    /// Encloses an exact rational.
    pub fn from_rational(c: &Rational) -> Self {
        let v = rational_to_f64(c);
        if Rational::from_float(v).as_ref() == Some(c) {
            Interval::point(v)
        } else {
            Interval::new(v.next_down(), v.next_up())
        }
    }

    fn widen(lo: f64, hi: f64) -> Self {
        Interval::new(lo.next_down(), hi.next_up())
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval::widen(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn mul(self, o: Interval) -> Interval {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::widen(lo, hi)
    }

    /// Tight power: even exponents of an interval straddling zero start at 0.
    pub fn powi(self, e: u32) -> Interval {
        if e == 0 {
            return Interval::point(1.0);
        }
        if e == 1 {
            return self;
        }
        let a = self.lo.abs().powi(e as i32);
        let b = self.hi.abs().powi(e as i32);
        let (lo, hi) = if e % 2 == 1 {
            (self.lo.signum() * a, self.hi.signum() * b)
        } else if self.lo <= 0.0 && self.hi >= 0.0 {
            (0.0, a.max(b))
        } else {
            (a.min(b), a.max(b))
        };
        // powi is not correctly rounded; widen by a few ulps in relative terms.
        let slack = |v: f64| v.abs() * 4.0 * f64::EPSILON * e as f64;
        let lo = if lo == 0.0 && e % 2 == 0 { 0.0 } else { (lo - slack(lo)).next_down() };
        Interval::new(lo, (hi + slack(hi)).next_up())
    }
}

/// Enclosure of `p` over the box `dims`.
pub fn eval_poly(p: &Poly, dims: &[Interval]) -> Interval {
    let mut acc = Interval::point(0.0);
    for (alpha, c) in p.terms() {
        if c.is_zero() {
            continue;
        }
        let mut term = Interval::from_rational(c);
        for (iv, &e) in dims.iter().zip(alpha.exponents()) {
            if e > 0 {
                term = term.mul(iv.powi(e));
            }
        }
        acc = acc.add(term);
    }
    acc
}
