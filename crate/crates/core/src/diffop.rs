//! Homogeneous constant-coefficient differential operators
//! `A w = Σ_{|α|=k} ∂^α A_α w` stored as coefficient tensors, with their
//! polynomial symbols `A(ξ) = Σ ξ^α A_α` as a derived view.
//!
//! Built-in operators and their conventions (`ξ = (ξ1, …, ξn)`, matrix-valued
//! fields stored row-major):
//!
//! | name             | n     | from → to | symbol                                             |
//! |------------------|-------|-----------|----------------------------------------------------|
//! | `grad_scalar`    | any   | 1 → n     | column `(ξ1; …; ξn)`                               |
//! | `grad_vector`    | any   | n → n²    | `(∇u)_{ij} = ∂_j u_i`, entry `(i·n+j, i) = ξ_j`     |
//! | `div`            | any   | n → 1     | row `[ξ1 … ξn]`                                    |
//! | `curl3d`         | 3     | 3 → 3     | `[[0,−ξ3,ξ2],[ξ3,0,−ξ1],[−ξ2,ξ1,0]]` (right-handed) |
//! | `curl2d_rowwise` | 2     | 4 → 2     | row `i`: `∂1 F_{i2} − ∂2 F_{i1}`                     |
//! | `symgrad`        | any   | n → n²    | `(Eu)_{ij} = (∂_j u_i + ∂_i u_j)/2`                 |
//! | `laplacian`      | any   | 1 → 1     | `ξ1² + … + ξn²`                                    |
//! | `zero`           | any   | 1 → 1     | order 1, no coefficients                           |

use std::collections::BTreeMap;

use num::One;
use thiserror::Error;

use crate::polymat::{int, rat, MultiIndex, Poly, PolyError, PolyMatrix, RatMatrix, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffOpError {
    #[error("symbol entry ({row}, {col}) is not homogeneous of the common degree")]
    NonHomogeneous { row: usize, col: usize },
    #[error("symbol has degree {found}, expected {expected}")]
    DegreeMismatch { expected: u32, found: u32 },
    #[error("multi-index {alpha} has degree {found}, operator order is {order}")]
    IndexOrder { alpha: String, found: u32, order: u32 },
    #[error("coefficient for {alpha} is {got:?}, expected {expected:?}")]
    CoefficientShape {
        alpha: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("multi-index {alpha} has {got} entries, expected {expected}")]
    IndexLength { alpha: String, expected: usize, got: usize },
    #[error("unknown built-in operator `{0}`")]
    UnknownBuiltin(String),
    #[error("built-in `{name}` does not support dimension n = {n}")]
    UnsupportedDimension { name: String, n: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// A k-homogeneous linear differential operator with constant rational
/// coefficients, from `R^dim_from`-valued to `R^dim_to`-valued fields on `R^n`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DiffOp {
    n: usize,
    order: u32,
    dim_from: usize,
    dim_to: usize,
    coeffs: BTreeMap<MultiIndex, RatMatrix>,
}

pub const BUILTIN_NAMES: [&str; 8] = [
    "grad_scalar",
    "grad_vector",
    "div",
    "curl3d",
    "curl2d_rowwise",
    "symgrad",
    "laplacian",
    "zero",
];

impl DiffOp {
    /// Validates and builds an operator. Zero coefficient matrices are dropped.
    pub fn new(
        n: usize,
        order: u32,
        dim_from: usize,
        dim_to: usize,
        coeffs: impl IntoIterator<Item = (MultiIndex, RatMatrix)>,
    ) -> Result<Self, DiffOpError> {
        let mut map = BTreeMap::new();
        for (alpha, m) in coeffs {
            if alpha.nvars() != n {
                return Err(DiffOpError::IndexLength {
                    alpha: alpha.to_string(),
                    expected: n,
                    got: alpha.nvars(),
                });
            }
            if alpha.degree() != order {
                return Err(DiffOpError::IndexOrder {
                    alpha: alpha.to_string(),
                    found: alpha.degree(),
                    order,
                });
            }
            if (m.rows(), m.cols()) != (dim_to, dim_from) {
                return Err(DiffOpError::CoefficientShape {
                    alpha: alpha.to_string(),
                    expected: (dim_to, dim_from),
                    got: (m.rows(), m.cols()),
                });
            }
            if m.is_zero() {
                continue;
            }
            match map.remove(&alpha) {
                Some(prev) => {
                    let sum = add_rat(&prev, &m);
                    if !sum.is_zero() {
                        map.insert(alpha, sum);
                    }
                }
                None => {
                    map.insert(alpha, m);
                }
            }
        }
        Ok(DiffOp {
            n,
            order,
            dim_from,
            dim_to,
            coeffs: map,
        })
    }

    pub fn zero(n: usize, order: u32, dim_from: usize, dim_to: usize) -> Self {
        DiffOp {
            n,
            order,
            dim_from,
            dim_to,
            coeffs: BTreeMap::new(),
        }
    }

    /// The order-0 identity on `R^dim`.
    pub fn identity(n: usize, dim: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(MultiIndex::zero(n), RatMatrix::identity(dim));
        DiffOp {
            n,
            order: 0,
            dim_from: dim,
            dim_to: dim,
            coeffs,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim_from(&self) -> usize {
        self.dim_from
    }

    pub fn dim_to(&self) -> usize {
        self.dim_to
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Nonzero coefficient matrices in canonical multi-index order.
    pub fn coeffs(&self) -> impl Iterator<Item = (&MultiIndex, &RatMatrix)> {
        self.coeffs.iter()
    }

    /// `A(ξ) = Σ_{|α|=k} ξ^α A_α` as a `dim_to × dim_from` polynomial matrix.
    pub fn symbol(&self) -> PolyMatrix {
        PolyMatrix::from_fn(self.dim_to, self.dim_from, self.n, |i, j| {
            Poly::from_terms(
                self.n,
                self.coeffs
                    .iter()
                    .map(|(alpha, m)| (alpha.clone(), m.get(i, j).clone())),
            )
            .expect("index lengths validated")
        })
    }

    /// Inverse of [`DiffOp::symbol`]. Every entry must be homogeneous of one
    /// common degree; a zero symbol takes `expected_degree` (or 0).
    pub fn from_symbol(m: &PolyMatrix, expected_degree: Option<u32>) -> Result<Self, DiffOpError> {
        let degree = match m.homogeneous_degree() {
            Err((row, col)) => return Err(DiffOpError::NonHomogeneous { row, col }),
            Ok(d) => d,
        };
        let order = match (degree, expected_degree) {
            (Some(d), Some(e)) if d != e => {
                return Err(DiffOpError::DegreeMismatch {
                    expected: e,
                    found: d,
                })
            }
            (Some(d), _) => d,
            (None, e) => e.unwrap_or(0),
        };
        let mut alphas: Vec<MultiIndex> = m
            .entries()
            .iter()
            .flat_map(|p| p.terms().map(|(a, _)| a.clone()))
            .collect();
        alphas.sort();
        alphas.dedup();
        let coeffs = alphas.into_iter().map(|a| {
            let c = m.coefficient_matrix(&a);
            (a, c)
        });
        DiffOp::new(m.nvars(), order, m.cols(), m.rows(), coeffs)
    }

    /// `self ∘ inner` (apply `inner` first); symbols multiply.
    pub fn compose(&self, inner: &DiffOp) -> Result<DiffOp, DiffOpError> {
        let sym = self.symbol().checked_mul(&inner.symbol())?;
        DiffOp::from_symbol(&sym, Some(self.order + inner.order))
    }

    /// One of the operators in [`BUILTIN_NAMES`].
    pub fn builtin(name: &str, n: usize) -> Result<Self, DiffOpError> {
        let unsupported = || DiffOpError::UnsupportedDimension {
            name: name.to_string(),
            n,
        };
        if n == 0 {
            return Err(unsupported());
        }
        let x = |i: usize| Poly::var(n, i);
        let zero = || Poly::zero(n);
        let sym = match name {
            "grad_scalar" => PolyMatrix::from_fn(n, 1, n, |i, _| x(i)),
            "div" => PolyMatrix::from_fn(1, n, n, |_, j| x(j)),
            "grad_vector" => PolyMatrix::from_fn(n * n, n, n, |row, col| {
                let (i, j) = (row / n, row % n);
                if i == col {
                    x(j)
                } else {
                    zero()
                }
            }),
            "symgrad" => PolyMatrix::from_fn(n * n, n, n, |row, col| {
                let (i, j) = (row / n, row % n);
                let half = rat(1, 2);
                let mut p = zero();
                if i == col {
                    p = &p + &x(j).scale(&half);
                }
                if j == col {
                    p = &p + &x(i).scale(&half);
                }
                p
            }),
            "curl3d" => {
                if n != 3 {
                    return Err(unsupported());
                }
                let neg = |i: usize| x(i).scale(&int(-1));
                PolyMatrix::from_rows(
                    3,
                    vec![
                        vec![zero(), neg(2), x(1)],
                        vec![x(2), zero(), neg(0)],
                        vec![neg(1), x(0), zero()],
                    ],
                )?
            }
            "curl2d_rowwise" => {
                if n != 2 {
                    return Err(unsupported());
                }
                PolyMatrix::from_fn(2, 4, 2, |i, col| match (col / 2 == i, col % 2) {
                    (true, 0) => x(1).scale(&int(-1)),
                    (true, _) => x(0),
                    (false, _) => zero(),
                })
            }
            "laplacian" => {
                let s = (0..n).fold(zero(), |acc, i| &acc + &x(i).pow(2));
                PolyMatrix::from_rows(n, vec![vec![s]])?
            }
            "zero" => return Ok(DiffOp::zero(n, 1, 1, 1)),
            other => return Err(DiffOpError::UnknownBuiltin(other.to_string())),
        };
        DiffOp::from_symbol(&sym, None)
    }
}

fn add_rat(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    a.sub(&b.scale(&-Rational::one()))
}

/// True if every entry of the symbol is homogeneous of degree `order` or zero.
pub fn symbol_is_homogeneous(op: &DiffOp) -> bool {
    match op.symbol().homogeneous_degree() {
        Ok(Some(d)) => d == op.order(),
        Ok(None) => true,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize, n: usize) -> Poly {
        Poly::var(n, i)
    }

    #[test]
    fn div_symbol() {
        let op = DiffOp::builtin("div", 2).unwrap();
        assert_eq!(op.order(), 1);
        assert_eq!(
            op.symbol(),
            PolyMatrix::from_rows(2, vec![vec![x(0, 2), x(1, 2)]]).unwrap()
        );
        let c: Vec<String> = op.coeffs().map(|(a, _)| a.to_string()).collect();
        assert_eq!(c, ["(1,0)", "(0,1)"]);
    }

    #[test]
    fn grad_scalar_symbol() {
        let op = DiffOp::builtin("grad_scalar", 3).unwrap();
        assert_eq!(op.symbol(), PolyMatrix::from_fn(3, 1, 3, |i, _| x(i, 3)));
        assert_eq!((op.dim_from(), op.dim_to()), (1, 3));
    }

    #[test]
    fn zero_operator_symbol() {
        let op = DiffOp::builtin("zero", 2).unwrap();
        assert!(op.is_zero());
        assert_eq!(op.order(), 1);
        assert_eq!(op.symbol(), PolyMatrix::zeros(1, 1, 2));
    }

    #[test]
    fn order_two_from_symbol() {
        let m = PolyMatrix::from_rows(
            2,
            vec![
                vec![-&x(1, 2).pow(2), &x(0, 2) * &x(1, 2)],
                vec![&x(0, 2) * &x(1, 2), -&x(0, 2).pow(2)],
            ],
        )
        .unwrap();
        let op = DiffOp::from_symbol(&m, None).unwrap();
        assert_eq!(op.order(), 2);
        let alphas: Vec<String> = op.coeffs().map(|(a, _)| a.to_string()).collect();
        assert_eq!(alphas, ["(2,0)", "(1,1)", "(0,2)"]);
        assert_eq!(op.symbol(), m);
        assert_eq!(
            DiffOp::from_symbol(&m, Some(3)),
            Err(DiffOpError::DegreeMismatch { expected: 3, found: 2 })
        );
    }

    #[test]
    fn mixed_degree_rejected() {
        let m = PolyMatrix::from_rows(2, vec![vec![&x(0, 2) + &Poly::one(2)]]).unwrap();
        assert_eq!(
            DiffOp::from_symbol(&m, None),
            Err(DiffOpError::NonHomogeneous { row: 0, col: 0 })
        );
    }

    #[test]
    fn classical_compositions_vanish() {
        let curl = DiffOp::builtin("curl3d", 3).unwrap();
        let grad = DiffOp::builtin("grad_scalar", 3).unwrap();
        let div = DiffOp::builtin("div", 3).unwrap();
        assert!(curl.compose(&grad).unwrap().is_zero());
        assert!(div.compose(&curl).unwrap().is_zero());
        let curl2 = DiffOp::builtin("curl2d_rowwise", 2).unwrap();
        let gradv = DiffOp::builtin("grad_vector", 2).unwrap();
        assert!(curl2.compose(&gradv).unwrap().is_zero());
    }

    #[test]
    fn builtins_are_homogeneous() {
        for name in BUILTIN_NAMES {
            for n in 1..=3 {
                match DiffOp::builtin(name, n) {
                    Ok(op) => {
                        assert!(symbol_is_homogeneous(&op), "{name} n={n}");
                        assert_eq!(DiffOp::from_symbol(&op.symbol(), Some(op.order())).unwrap(), op);
                    }
                    Err(DiffOpError::UnsupportedDimension { .. }) => {}
                    Err(e) => panic!("{name}: {e}"),
                }
            }
        }
    }

    #[test]
    fn builtin_errors() {
        assert!(matches!(DiffOp::builtin("curl3d", 2), Err(DiffOpError::UnsupportedDimension { .. })));
        assert!(matches!(DiffOp::builtin("rot", 2), Err(DiffOpError::UnknownBuiltin(_))));
    }

    #[test]
    fn index_order_validated() {
        let err = DiffOp::new(2, 1, 1, 1, [(MultiIndex::new(vec![1, 1]), RatMatrix::identity(1))]);
        assert!(matches!(err, Err(DiffOpError::IndexOrder { .. })));
    }

    #[test]
    fn symgrad_is_symmetric_part() {
        let op = DiffOp::builtin("symgrad", 2).unwrap();
        let s = op.symbol();
        // row (0,1) and row (1,0) agree
        for c in 0..2 {
            assert_eq!(s.get(1, c), s.get(2, c));
        }
        assert_eq!(s.get(0, 0), &x(0, 2));
    }
}
