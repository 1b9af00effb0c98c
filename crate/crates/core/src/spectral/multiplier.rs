//! Symbols compiled for fast exact evaluation at integer frequencies.

use num::{BigInt, Integer, One, ToPrimitive, Zero};

use crate::polymat::{rational_to_f64, Poly, PolyMatrix, Rational};

#[derive(Debug, Clone)]
struct IntPoly {
    terms: Vec<(Vec<u32>, i128)>,
}

/// A polynomial matrix stored as `entries / scale` with integer entries.
#[derive(Debug, Clone)]
pub(crate) struct IntSymbol {
    rows: usize,
    cols: usize,
    scale: i128,
    entries: Option<Vec<IntPoly>>,
    exact: PolyMatrix,
}

impl IntSymbol {
    pub fn compile(m: &PolyMatrix) -> Self {
        let mut lcm = BigInt::one();
        for p in m.entries() {
            for c in p.coefficients() {
                lcm = lcm.lcm(c.denom());
            }
        }
        let entries = m
            .entries()
            .iter()
            .map(|p| {
                let terms = p
                    .terms()
                    .map(|(alpha, c)| {
                        let v = c.numer() * (&lcm / c.denom());
                        v.to_i128().map(|v| (alpha.exponents().to_vec(), v))
                    })
                    .collect::<Option<Vec<_>>>()?;
                Some(IntPoly { terms })
            })
            .collect::<Option<Vec<_>>>();
        let scale = lcm.to_i128();
        IntSymbol {
            rows: m.rows(),
            cols: m.cols(),
            scale: scale.unwrap_or(0),
            entries: if scale.is_some() { entries } else { None },
            exact: m.clone(),
        }
    }

    pub fn compile_poly(p: &Poly) -> Self {
        let m = PolyMatrix::new(1, 1, p.nvars(), vec![p.clone()]).expect("1x1");
        Self::compile(&m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Integer entries at `xi` (to be divided by `scale`), or `None` on overflow.
    fn eval_int(&self, xi: &[i64]) -> Option<Vec<i128>> {
        let entries = self.entries.as_ref()?;
        let mut out = Vec::with_capacity(entries.len());
        for p in entries {
            let mut acc: i128 = 0;
            for (exps, c) in &p.terms {
                let mut t = *c;
                for (&x, &e) in xi.iter().zip(exps) {
                    for _ in 0..e {
                        t = t.checked_mul(x as i128)?;
                    }
                }
                acc = acc.checked_add(t)?;
            }
            out.push(acc);
        }
        Some(out)
    }

    pub fn eval_exact(&self, xi: &[i64]) -> Vec<Rational> {
        if let Some(v) = self.eval_int(xi) {
            let s = BigInt::from(self.scale);
            return v.into_iter().map(|x| Rational::new(BigInt::from(x), s.clone())).collect();
        }
        let point: Vec<Rational> = xi.iter().map(|&x| Rational::from_integer(x.into())).collect();
        self.exact
            .entries()
            .iter()
            .map(|p| p.eval(&point).expect("point length"))
            .collect()
    }

    pub fn eval_f64(&self, xi: &[i64]) -> Vec<f64> {
        if let Some(v) = self.eval_int(xi) {
            return v.into_iter().map(|x| ratio_f64(x, self.scale)).collect();
        }
        self.eval_exact(xi).iter().map(rational_to_f64).collect()
    }
}

const EXACT_F64: i128 = 1 << 53;

fn ratio_f64(num: i128, den: i128) -> f64 {
    if num.abs() < EXACT_F64 && den.abs() < EXACT_F64 {
        num as f64 / den as f64
    } else {
        rational_to_f64(&Rational::new(num.into(), den.into()))
    }
}

/// `Id − Q(ξ)/e(ξ)` (or `Q/e` when `complement` is false) where `Q/e` is a
/// rational matrix function; entries are combined exactly before rounding.
#[derive(Debug, Clone)]
pub(crate) struct RationalMultiplier {
    num: IntSymbol,
    den: IntSymbol,
    complement: bool,
}

pub(crate) enum Evaluated {
    Values(Vec<f64>),
    Singular,
}

impl RationalMultiplier {
    pub fn new(num: &PolyMatrix, den: &Poly, complement: bool) -> Self {
        RationalMultiplier {
            num: IntSymbol::compile(num),
            den: IntSymbol::compile_poly(den),
            complement,
        }
    }

    pub fn rows(&self) -> usize {
        self.num.rows()
    }

    pub fn cols(&self) -> usize {
        self.num.cols()
    }

    pub fn eval_f64(&self, xi: &[i64]) -> Evaluated {
        let cols = self.num.cols;
        if let (Some(q), Some(e)) = (self.num.eval_int(xi), self.den.eval_int(xi)) {
            if e[0] == 0 {
                return Evaluated::Singular;
            }
            // Q/Sq over e/Se = (Q·Se) / (Sq·e).
            let fast = (|| {
                let den = self.num.scale.checked_mul(e[0])?;
                q.iter()
                    .enumerate()
                    .map(|(k, &qk)| {
                        let mut n = qk.checked_mul(self.den.scale)?;
                        if self.complement {
                            let diag = if k / cols == k % cols { den } else { 0 };
                            n = diag.checked_sub(n)?;
                        }
                        Some(ratio_f64(n, den))
                    })
                    .collect::<Option<Vec<f64>>>()
            })();
            if let Some(v) = fast {
                return Evaluated::Values(v);
            }
        }
        match self.eval_exact(xi) {
            Some(v) => Evaluated::Values(v.iter().map(rational_to_f64).collect()),
            None => Evaluated::Singular,
        }
    }

    /// Exact entries, or `None` where the denominator vanishes.
    pub fn eval_exact(&self, xi: &[i64]) -> Option<Vec<Rational>> {
        let e = self.den.eval_exact(xi).pop().expect("1x1");
        if e.is_zero() {
            return None;
        }
        let cols = self.num.cols;
        Some(
            self.num
                .eval_exact(xi)
                .into_iter()
                .enumerate()
                .map(|(k, q)| {
                    let v = q / &e;
                    if self.complement {
                        let diag = if k / cols == k % cols { Rational::one() } else { Rational::zero() };
                        diag - v
                    } else {
                        v
                    }
                })
                .collect(),
        )
    }
}
