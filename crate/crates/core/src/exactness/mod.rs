//! Rank analysis of operator symbols, the Decell pseudo-inverse, synthesis of
//! exact potentials and annihilators, and verification of
//! `ker A(ξ) = im B(ξ)`.
//!
//! Characteristic coefficients follow `det(λ·Id − H) = λ^N + a_1 λ^{N−1} + …`,
//! so for a Gram matrix `H = A A*` they alternate in sign:
//! `e_j = (−1)^j a_j ≥ 0`. The generic rank is the largest `j` with
//! `a_j ≢ 0`, and `A` has constant rank exactly when `e_r(ξ) > 0` for all
//! `ξ ≠ 0`.

pub mod interval;

use std::collections::VecDeque;

use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diffop::{DiffOp, DiffOpError};
use crate::polymat::{int, rational_to_f64, CharPoly, Poly, PolyMatrix, Rational};
use interval::{eval_poly, Interval};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactnessError {
    #[error("operator is not of constant rank: rank drops at {}", fmt_point(.witness))]
    NotConstantRank { witness: Vec<Rational> },
    #[error("synthesized symbol is not homogeneous of degree {expected}")]
    NonHomogeneousResult { expected: u32 },
    #[error("A(ξ)B(ξ) is not identically zero: entry ({row}, {col}) = {entry}")]
    CompositionNonzero { row: usize, col: usize, entry: Poly },
    #[error("rank A + rank B = {rank_a} + {rank_b} != {dim} at ξ = {}", fmt_point(.xi))]
    RankSumFailure {
        xi: Vec<Rational>,
        rank_a: usize,
        rank_b: usize,
        dim: usize,
    },
    #[error("operators do not compose: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    DiffOp(#[from] DiffOpError),
}

pub fn fmt_point(p: &[Rational]) -> String {
    let parts: Vec<String> = p.iter().map(crate::polymat::format_rational).collect();
    format!("({})", parts.join(","))
}

/// Outcome of a constant-rank positivity check.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// `e_r > 0` proven on every face of the unit max-norm sphere; `depth` is
    /// the deepest subdivision level that was needed.
    Certified { depth: u32 },
    /// Exact rational point where the rank drops.
    Falsified { witness: Vec<Rational> },
    /// Neither proof nor counterexample within the depth cap.
    Inconclusive { min_sampled_value: f64, samples: usize },
}

#[derive(Debug, Clone)]
pub struct RankReport {
    pub generic_rank: usize,
    /// `a_0 … a_N` of `H = A A*`.
    pub a_coeffs: Vec<Poly>,
    pub certificate: Certificate,
}

impl RankReport {
    /// `e_r = (−1)^r a_r`, nonnegative wherever evaluated.
    pub fn leading_invariant(&self) -> Poly {
        signed_coeff(&self.a_coeffs, self.generic_rank)
    }
}

fn signed_coeff(a: &[Poly], j: usize) -> Poly {
    if j % 2 == 0 {
        a[j].clone()
    } else {
        -&a[j]
    }
}

/// One exact rank sample of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSample {
    pub xi: Vec<Rational>,
    pub rank_a: usize,
    pub rank_b: usize,
}

/// An (annihilator, potential) pair together with the evidence collected for it.
#[derive(Debug, Clone)]
pub struct ExactPair {
    pub annihilator: DiffOp,
    pub potential: DiffOp,
    pub symbolic_zero: bool,
    pub rank_samples: Vec<RankSample>,
}

/// Gram matrix, characteristic data and rank of a symbol.
#[derive(Debug, Clone)]
pub struct SymbolAnalysis {
    pub symbol: PolyMatrix,
    pub gram: PolyMatrix,
    pub char_poly: CharPoly,
    pub rank: usize,
}

impl SymbolAnalysis {
    pub fn new(symbol: &PolyMatrix) -> Self {
        let gram = symbol
            .checked_mul(&symbol.transpose())
            .expect("M·M* is always conformable");
        let char_poly = gram.char_poly_faddeev().expect("Gram matrix is square");
        let rank = char_poly.generic_rank();
        SymbolAnalysis {
            symbol: symbol.clone(),
            gram,
            char_poly,
            rank,
        }
    }

    /// `a_r` with the raw characteristic sign.
    pub fn a_r(&self) -> &Poly {
        &self.char_poly.coeffs[self.rank]
    }

    pub fn e_r(&self) -> Poly {
        signed_coeff(&self.char_poly.coeffs, self.rank)
    }

    /// `S = a_0 H^{r−1} + … + a_{r−1} Id`, which is the Faddeev matrix `M_r`.
    pub fn decell_sum(&self) -> &PolyMatrix {
        self.char_poly.chain_matrix(self.rank)
    }
}

pub fn generic_rank(a: &DiffOp) -> RankReport {
    let an = SymbolAnalysis::new(&a.symbol());
    RankReport {
        generic_rank: an.rank,
        a_coeffs: an.char_poly.coeffs,
        certificate: Certificate::Inconclusive {
            min_sampled_value: f64::INFINITY,
            samples: 0,
        },
    }
}

/// Random rational point, each coordinate `p/q` with `p, q ∈ [−100, 100] \ {0}`.
pub fn random_rational_point(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    (0..n)
        .map(|_| Rational::new(nonzero(rng).into(), nonzero(rng).into()))
        .collect()
}

fn nonzero(rng: &mut impl Rng) -> i64 {
    loop {
        let v = rng.gen_range(-100i64..=100);
        if v != 0 {
            return v;
        }
    }
}

/// Deterministic candidate points: coordinate axes first, then all nonzero
/// vectors with entries in {−1, 0, 1} (one of each ± pair).
fn structured_points(n: usize) -> Vec<Vec<Rational>> {
    let mut out: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { int(1) } else { int(0) }).collect())
        .collect();
    if n <= 6 {
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let v: Vec<i64> = (0..n)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect();
            let first_nonzero = v.iter().find(|&&d| d != 0);
            if first_nonzero != Some(&1) || v.iter().filter(|&&d| d != 0).count() < 2 {
                continue;
            }
            out.push(v.into_iter().map(int).collect());
        }
    }
    out
}

/// Searches for a nonzero rational `ξ` with `rank A(ξ) < r`. Structured points
/// come first, then random points alternating between coordinate subspaces
/// and the full space. `budget` caps the total number of candidates.
pub fn falsify_constant_rank(a: &DiffOp, budget: usize, seed: u64) -> Option<Vec<Rational>> {
    let an = SymbolAnalysis::new(&a.symbol());
    falsify_with(&an, a.n(), budget, seed)
}

fn falsify_with(an: &SymbolAnalysis, n: usize, budget: usize, seed: u64) -> Option<Vec<Rational>> {
    if an.rank == 0 || n == 0 {
        return None;
    }
    let e_r = an.e_r();
    let check = |xi: &Vec<Rational>| -> bool {
        e_r.eval(xi).map(|v| v.is_zero()).unwrap_or(false)
            && an.symbol.eval_rational(xi).map(|m| m.rank() < an.rank).unwrap_or(false)
    };
    let mut used = 0;
    for xi in structured_points(n) {
        if used >= budget {
            return None;
        }
        used += 1;
        if check(&xi) {
            return Some(xi);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while used < budget {
        let mut xi = random_rational_point(&mut rng, n);
        if used % 2 == 0 && n > 1 {
            let keep = rng.gen_range(0..n);
            for (i, x) in xi.iter_mut().enumerate() {
                if i != keep && rng.gen_bool(0.5) {
                    *x = Rational::zero();
                }
            }
        }
        used += 1;
        if check(&xi) {
            return Some(xi);
        }
    }
    None
}

/// Default subdivision cap for [`certify_constant_rank`].
pub const DEFAULT_MAX_DEPTH: u32 = 12;

/// Decides `e_r > 0` on the boundary of `[−1, 1]^n` (enough by homogeneity)
/// by interval branch-and-bound over the `2n` faces. Box centres are checked
/// exactly for zeros of `e_r`; those are rank-drop witnesses.
pub fn certify_constant_rank(a: &DiffOp, max_depth: u32) -> Certificate {
    let an = SymbolAnalysis::new(&a.symbol());
    certify_with(&an, a.n(), max_depth)
}

fn certify_with(an: &SymbolAnalysis, n: usize, max_depth: u32) -> Certificate {
    if an.rank == 0 || n == 0 {
        return Certificate::Certified { depth: 0 };
    }
    let e_r = an.e_r();
    let mut queue: VecDeque<(Vec<Interval>, u32)> = VecDeque::new();
    for axis in 0..n {
        for side in [1.0, -1.0] {
            let dims = (0..n)
                .map(|j| if j == axis { Interval::point(side) } else { Interval::new(-1.0, 1.0) })
                .collect();
            queue.push_back((dims, 0));
        }
    }
    let mut deepest = 0;
    let mut unresolved = false;
    let mut min_sampled = f64::INFINITY;
    let mut samples = 0usize;
    while let Some((dims, depth)) = queue.pop_front() {
        let enclosure = eval_poly(&e_r, &dims);
        if enclosure.lo > 0.0 {
            deepest = deepest.max(depth);
            continue;
        }
        let centre: Vec<Rational> = dims
            .iter()
            .map(|iv| Rational::from_float(0.5 * (iv.lo + iv.hi)).expect("finite"))
            .collect();
        let value = e_r.eval(&centre).expect("point length");
        samples += 1;
        min_sampled = min_sampled.min(rational_to_f64(&value));
        if value.is_zero() {
            // e_r(ξ) = 0 with H PSD means fewer than r nonzero eigenvalues.
            debug_assert!(an.symbol.eval_rational(&centre).unwrap().rank() < an.rank);
            return Certificate::Falsified { witness: centre };
        }
        if depth >= max_depth {
            unresolved = true;
            continue;
        }
        let (widest, _) = dims
            .iter()
            .enumerate()
            .map(|(i, iv)| (i, iv.hi - iv.lo))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let mid = 0.5 * (dims[widest].lo + dims[widest].hi);
        let mut left = dims.clone();
        left[widest] = Interval::new(dims[widest].lo, mid);
        let mut right = dims;
        right[widest] = Interval::new(mid, right[widest].hi);
        queue.push_back((left, depth + 1));
        queue.push_back((right, depth + 1));
    }
    if unresolved {
        Certificate::Inconclusive {
            min_sampled_value: min_sampled,
            samples,
        }
    } else {
        Certificate::Certified { depth: deepest }
    }
}

/// Decell's formula with denominators cleared: returns `(N, d)` with
/// `M† = N / d` wherever `d ≠ 0`. The sign is chosen so that `d = e_r`, which
/// is positive away from rank drops. For `r = 0` returns `(0, 1)`.
pub fn pseudoinverse_symbol(m: &PolyMatrix) -> (PolyMatrix, Poly) {
    let an = SymbolAnalysis::new(m);
    pseudoinverse_from(&an)
}

pub(crate) fn pseudoinverse_from(an: &SymbolAnalysis) -> (PolyMatrix, Poly) {
    let m = &an.symbol;
    if an.rank == 0 {
        return (PolyMatrix::zeros(m.cols(), m.rows(), m.nvars()), Poly::one(m.nvars()));
    }
    let num = m
        .transpose()
        .checked_mul(an.decell_sum())
        .expect("conformable");
    let num = if an.rank % 2 == 1 { num } else { num.scale(&-Rational::one()) };
    (num, an.e_r())
}

/// Falsification effort spent before synthesis.
#[derive(Clone, Debug)]
pub struct SynthesisOptions {
    pub falsify_budget: usize,
    pub seed: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            falsify_budget: 64,
            seed: 0,
        }
    }
}

/// Exact potential `B(ξ) = a_r(ξ)·Id_W + A*(ξ) S(ξ) A(ξ)`, the polynomial
/// expansion of `a_r (Id − A†A)`, with scalar content removed.
pub fn potential(a: &DiffOp) -> Result<DiffOp, ExactnessError> {
    potential_with(a, &SynthesisOptions::default())
}

pub fn potential_with(a: &DiffOp, opts: &SynthesisOptions) -> Result<DiffOp, ExactnessError> {
    let an = SymbolAnalysis::new(&a.symbol());
    let w = a.dim_from();
    if an.rank == 0 {
        return Ok(DiffOp::identity(a.n(), w));
    }
    if let Some(witness) = falsify_with(&an, a.n(), opts.falsify_budget, opts.seed) {
        return Err(ExactnessError::NotConstantRank { witness });
    }
    let sym = &an.symbol;
    let projected = sym
        .transpose()
        .checked_mul(an.decell_sum())
        .and_then(|t| t.checked_mul(sym))
        .expect("conformable");
    let b = PolyMatrix::identity(w, a.n())
        .scale_poly(an.a_r())
        .checked_add(&projected)
        .expect("W × W");
    let expected = 2 * a.order() * an.rank as u32;
    finish(&b, expected)
}

/// Exact annihilator `A(ξ) = a_r(ξ)·Id_W + Σ_{i<r} a_i(ξ) (B B*)^{r−i}`, the
/// polynomial expansion of `a_r (Id − B B†)`, with scalar content removed.
pub fn annihilator(b: &DiffOp) -> Result<DiffOp, ExactnessError> {
    annihilator_with(b, &SynthesisOptions::default())
}

pub fn annihilator_with(b: &DiffOp, opts: &SynthesisOptions) -> Result<DiffOp, ExactnessError> {
    let an = SymbolAnalysis::new(&b.symbol());
    let w = b.dim_to();
    if an.rank == 0 {
        return Ok(DiffOp::identity(b.n(), w));
    }
    if let Some(witness) = falsify_with(&an, b.n(), opts.falsify_budget, opts.seed) {
        return Err(ExactnessError::NotConstantRank { witness });
    }
    // H·M_r + a_r Id, i.e. the next Faddeev matrix.
    let a = an
        .gram
        .checked_mul(an.decell_sum())
        .and_then(|t| t.checked_add(&PolyMatrix::identity(w, b.n()).scale_poly(an.a_r())))
        .expect("W × W");
    let expected = 2 * b.order() * an.rank as u32;
    finish(&a, expected)
}

fn finish(sym: &PolyMatrix, expected: u32) -> Result<DiffOp, ExactnessError> {
    let (normalized, _) = sym.content_normalize();
    DiffOp::from_symbol(&normalized, Some(expected)).map_err(|e| match e {
        DiffOpError::NonHomogeneous { .. } | DiffOpError::DegreeMismatch { .. } => {
            ExactnessError::NonHomogeneousResult { expected }
        }
        other => other.into(),
    })
}

/// Checks `A(ξ)B(ξ) ≡ 0` symbolically and `rank A(ξ) + rank B(ξ) = dim W` at
/// `samples` random nonzero rational frequencies.
pub fn verify_exact_pair(a: &DiffOp, b: &DiffOp, samples: usize, seed: u64) -> Result<ExactPair, ExactnessError> {
    if a.dim_from() != b.dim_to() || a.n() != b.n() {
        return Err(ExactnessError::DimensionMismatch(format!(
            "A: R^{} -> R^{} on R^{}, B: R^{} -> R^{} on R^{}",
            a.dim_from(),
            a.dim_to(),
            a.n(),
            b.dim_from(),
            b.dim_to(),
            b.n()
        )));
    }
    let sa = a.symbol();
    let sb = b.symbol();
    let prod = sa.checked_mul(&sb).expect("checked dimensions");
    for i in 0..prod.rows() {
        for j in 0..prod.cols() {
            if !prod.get(i, j).is_zero() {
                return Err(ExactnessError::CompositionNonzero {
                    row: i,
                    col: j,
                    entry: prod.get(i, j).clone(),
                });
            }
        }
    }
    let dim = a.dim_from();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rank_samples = Vec::with_capacity(samples);
    for _ in 0..samples {
        let xi = random_rational_point(&mut rng, a.n());
        let rank_a = sa.eval_rational(&xi).expect("length").rank();
        let rank_b = sb.eval_rational(&xi).expect("length").rank();
        if rank_a + rank_b != dim {
            return Err(ExactnessError::RankSumFailure {
                xi,
                rank_a,
                rank_b,
                dim,
            });
        }
        rank_samples.push(RankSample { xi, rank_a, rank_b });
    }
    Ok(ExactPair {
        annihilator: a.clone(),
        potential: b.clone(),
        symbolic_zero: true,
        rank_samples,
    })
}

/// Synthesizes the potential of `a` and verifies the resulting pair.
pub fn synthesize_pair(a: &DiffOp, samples: usize, seed: u64) -> Result<ExactPair, ExactnessError> {
    let b = potential_with(
        a,
        &SynthesisOptions {
            seed,
            ..SynthesisOptions::default()
        },
    )?;
    verify_exact_pair(a, &b, samples, seed)
}

/// Whether `e_r` is nonzero at the given point; used by spectral code to spot
/// rank drops at lattice frequencies.
pub fn rank_is_generic_at(an: &SymbolAnalysis, xi: &[Rational]) -> bool {
    !an.e_r().eval(xi).map(|v| v.is_zero()).unwrap_or(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::rat;

    fn x(i: usize) -> Poly {
        Poly::var(2, i)
    }

    fn op(name: &str, n: usize) -> DiffOp {
        DiffOp::builtin(name, n).unwrap()
    }

    fn diag() -> DiffOp {
        let m = PolyMatrix::from_rows(2, vec![vec![x(0), Poly::zero(2)], vec![Poly::zero(2), x(1)]]).unwrap();
        DiffOp::from_symbol(&m, None).unwrap()
    }

    fn perp() -> PolyMatrix {
        PolyMatrix::from_rows(
            2,
            vec![
                vec![-&x(1).pow(2), &x(0) * &x(1)],
                vec![&x(0) * &x(1), -&x(0).pow(2)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn rank_of_div_and_grad() {
        let r = generic_rank(&op("div", 2));
        assert_eq!(r.generic_rank, 1);
        assert_eq!(r.a_coeffs[1], -&(&x(0).pow(2) + &x(1).pow(2)));
        let g = generic_rank(&op("grad_scalar", 2));
        assert_eq!(g.generic_rank, 1);
        assert!(g.a_coeffs[2].is_zero());
        assert_eq!(generic_rank(&op("zero", 2)).generic_rank, 0);
    }

    #[test]
    fn falsifier_examples() {
        assert_eq!(falsify_constant_rank(&diag(), 10, 1), Some(vec![int(1), int(0)]));
        assert_eq!(falsify_constant_rank(&op("div", 2), 500, 1), None);
        assert_eq!(falsify_constant_rank(&op("zero", 2), 500, 1), None);
    }

    #[test]
    fn certification_examples() {
        assert_eq!(certify_constant_rank(&op("div", 2), 12), Certificate::Certified { depth: 0 });
        assert_eq!(
            certify_constant_rank(&diag(), 12),
            Certificate::Falsified { witness: vec![int(1), int(0)] }
        );
        assert_eq!(certify_constant_rank(&op("grad_scalar", 3), 12), Certificate::Certified { depth: 0 });
    }

    #[test]
    fn depth_cap_gives_inconclusive() {
        // e_1 = (ξ1 − ξ2/3)² vanishes only off the dyadic grid.
        let p = &x(0) - &x(1).scale(&rat(1, 3));
        let m = PolyMatrix::from_rows(2, vec![vec![p]]).unwrap();
        let a = DiffOp::from_symbol(&m, None).unwrap();
        match certify_constant_rank(&a, 4) {
            Certificate::Inconclusive { samples, min_sampled_value } => {
                assert!(samples > 0);
                assert!(min_sampled_value >= 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pseudoinverse_examples() {
        let div = op("div", 2).symbol();
        let (num, den) = pseudoinverse_symbol(&div);
        assert_eq!(num, div.transpose());
        assert_eq!(den, &x(0).pow(2) + &x(1).pow(2));

        let (num, den) = pseudoinverse_symbol(&PolyMatrix::zeros(2, 3, 2));
        assert!(num.is_zero());
        assert_eq!(num.shape(), (3, 2));
        assert_eq!(den, Poly::one(2));

        let (num, den) = pseudoinverse_symbol(&PolyMatrix::identity(2, 2));
        assert_eq!(num, PolyMatrix::identity(2, 2));
        assert_eq!(den, Poly::one(2));
    }

    #[test]
    fn potential_of_div_is_perp_projector() {
        let b = potential(&op("div", 2)).unwrap();
        assert_eq!(b.order(), 2);
        assert_eq!(b.symbol(), perp());
    }

    #[test]
    fn potential_of_zero_is_identity() {
        let a = DiffOp::zero(2, 1, 3, 1);
        let b = potential(&a).unwrap();
        assert_eq!(b, DiffOp::identity(2, 3));
        assert_eq!(b.order(), 0);
    }

    #[test]
    fn potential_of_injective_symbol_is_zero() {
        let b = potential(&op("grad_scalar", 2)).unwrap();
        assert!(b.is_zero());
        assert_eq!((b.dim_from(), b.dim_to(), b.order()), (1, 1, 2));
    }

    #[test]
    fn potential_rejects_rank_drop() {
        assert!(matches!(potential(&diag()), Err(ExactnessError::NotConstantRank { .. })));
        assert!(matches!(annihilator(&diag()), Err(ExactnessError::NotConstantRank { .. })));
    }

    #[test]
    fn annihilator_of_grad() {
        let a = annihilator(&op("grad_scalar", 2)).unwrap();
        assert_eq!(a.symbol(), perp());
        assert_eq!(a.order(), 2);
    }

    #[test]
    fn annihilator_of_identity_is_zero() {
        let a = annihilator(&DiffOp::identity(2, 3)).unwrap();
        assert!(a.is_zero());
        assert_eq!(a.order(), 0);
    }

    #[test]
    fn annihilator_of_curl_has_div_kernel() {
        let a = annihilator(&op("curl3d", 3)).unwrap();
        let pair = verify_exact_pair(&a, &op("curl3d", 3), 100, 9).unwrap();
        assert!(pair.rank_samples.iter().all(|s| s.rank_a == 1 && s.rank_b == 2));
    }

    #[test]
    fn verify_examples() {
        let div = op("div", 2);
        let pair = synthesize_pair(&div, 100, 1).unwrap();
        assert!(pair.symbolic_zero);
        assert!(pair.rank_samples.iter().all(|s| s.rank_a == 1 && s.rank_b == 1));

        let pair = verify_exact_pair(&op("div", 3), &op("curl3d", 3), 100, 2).unwrap();
        assert!(pair.rank_samples.iter().all(|s| s.rank_a == 1 && s.rank_b == 2));

        match verify_exact_pair(&div, &op("grad_scalar", 2), 10, 3) {
            Err(ExactnessError::CompositionNonzero { entry, .. }) => {
                assert_eq!(entry, &x(0).pow(2) + &x(1).pow(2))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rank_sum_failure_detected() {
        // A = 0 on R^2 with B = grad: A·B = 0 but ranks 0 + 1 != 2.
        let b = op("grad_scalar", 2);
        let a = DiffOp::zero(2, 1, b.dim_to(), 1);
        assert!(matches!(
            verify_exact_pair(&a, &b, 5, 0),
            Err(ExactnessError::RankSumFailure { rank_a: 0, rank_b: 1, dim: 2, .. })
        ));
    }
}
