use std::fmt;

use num::{One, Zero};

use super::poly::PowerTable;
use super::{int, rational_gcd, MultiIndex, Poly, PolyError, RatMatrix, Rational};

/// Dense row-major matrix of polynomials sharing one variable count.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    entries: Vec<Poly>,
}

/// Characteristic data of a square polynomial matrix `H`.
///
/// `coeffs[j]` is `a_j` in `det(λ·Id − H) = λ^N + a_1 λ^{N−1} + … + a_N`
/// (so `coeffs[0] = 1`). `chain[k-1]` is the Faddeev–LeVerrier matrix
/// `M_k = Σ_{i<k} a_i H^{k−1−i}`, for `k = 1..=N`.
#[derive(Clone, Debug)]
pub struct CharPoly {
    pub coeffs: Vec<Poly>,
    pub chain: Vec<PolyMatrix>,
}

impl CharPoly {
    /// Largest `j` with `a_j` not identically zero.
    pub fn generic_rank(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| !c.is_zero())
            .unwrap_or(0)
    }

    /// `M_k` for `k ≥ 1`.
    pub fn chain_matrix(&self, k: usize) -> &PolyMatrix {
        &self.chain[k - 1]
    }
}

impl PolyMatrix {
    pub fn new(rows: usize, cols: usize, nvars: usize, entries: Vec<Poly>) -> Result<Self, PolyError> {
        if entries.len() != rows * cols {
            return Err(PolyError::EntryCount {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        if let Some(bad) = entries.iter().find(|p| p.nvars() != nvars) {
            return Err(PolyError::NvarsMismatch {
                left: nvars,
                right: bad.nvars(),
            });
        }
        Ok(PolyMatrix {
            rows,
            cols,
            nvars,
            entries,
        })
    }

    pub fn from_rows(nvars: usize, rows: Vec<Vec<Poly>>) -> Result<Self, PolyError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(PolyError::EntryCount {
                expected: r * c,
                got: rows.iter().map(|row| row.len()).sum(),
            });
        }
        Self::new(r, c, nvars, rows.into_iter().flatten().collect())
    }

    pub fn from_fn(rows: usize, cols: usize, nvars: usize, mut f: impl FnMut(usize, usize) -> Poly) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let p = f(i, j);
                assert_eq!(p.nvars(), nvars);
                entries.push(p);
            }
        }
        PolyMatrix {
            rows,
            cols,
            nvars,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        Self::from_fn(rows, cols, nvars, |_, _| Poly::zero(nvars))
    }

    pub fn identity(size: usize, nvars: usize) -> Self {
        Self::from_fn(size, size, nvars, |i, j| {
            if i == j {
                Poly::one(nvars)
            } else {
                Poly::zero(nvars)
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Poly] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Poly::is_zero)
    }

    pub fn transpose(&self) -> PolyMatrix {
        Self::from_fn(self.cols, self.rows, self.nvars, |i, j| self.get(j, i).clone())
    }

    pub fn map(&self, mut f: impl FnMut(&Poly) -> Poly) -> PolyMatrix {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            entries: self.entries.iter().map(&mut f).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> PolyMatrix {
        self.map(|p| p.scale(c))
    }

    pub fn scale_poly(&self, p: &Poly) -> PolyMatrix {
        self.map(|q| q * p)
    }

    fn same_nvars(&self, other: &PolyMatrix) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::NvarsMismatch {
                left: self.nvars,
                right: other.nvars,
            });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        self.same_nvars(other)?;
        if self.shape() != other.shape() {
            return Err(PolyError::ShapeMismatch {
                op: "add",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn checked_sub(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        self.checked_add(&other.scale(&int(-1)))
    }

    pub fn checked_mul(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        self.same_nvars(other)?;
        if self.cols != other.rows {
            return Err(PolyError::ShapeMismatch {
                op: "mul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self::from_fn(self.rows, other.cols, self.nvars, |i, j| {
            let mut acc = Poly::zero(self.nvars);
            for k in 0..self.cols {
                let (a, b) = (self.get(i, k), other.get(k, j));
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                acc = &acc + &(a * b);
            }
            acc
        }))
    }

    pub fn trace(&self) -> Result<Poly, PolyError> {
        self.require_square()?;
        Ok((0..self.rows).fold(Poly::zero(self.nvars), |acc, i| &acc + self.get(i, i)))
    }

    fn require_square(&self) -> Result<(), PolyError> {
        if self.rows != self.cols {
            return Err(PolyError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    /// Common degree of all nonzero entries: `Ok(Some(k))`, `Ok(None)` for the
    /// zero matrix, or the offending `(row, col)` when entries are not
    /// homogeneous of one degree.
    pub fn homogeneous_degree(&self) -> Result<Option<u32>, (usize, usize)> {
        let mut degree = None;
        for i in 0..self.rows {
            for j in 0..self.cols {
                match self.get(i, j).homogeneous_degree() {
                    Err(_) => return Err((i, j)),
                    Ok(None) => {}
                    Ok(Some(d)) => match degree {
                        None => degree = Some(d),
                        Some(k) if k != d => return Err((i, j)),
                        Some(_) => {}
                    },
                }
            }
        }
        Ok(degree)
    }

    /// Exact substitution `ξ = point`.
    pub fn eval_rational(&self, point: &[Rational]) -> Result<RatMatrix, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::PointLength {
                expected: self.nvars,
                got: point.len(),
            });
        }
        let mut max_exp = vec![0; self.nvars];
        for p in &self.entries {
            for (slot, e) in max_exp.iter_mut().zip(p.max_exponents()) {
                *slot = (*slot).max(e);
            }
        }
        let table = PowerTable::new(point, max_exp);
        let data = self
            .entries
            .iter()
            .map(|p| {
                p.terms()
                    .fold(Rational::zero(), |acc, (alpha, c)| acc + c * table.monomial(alpha))
            })
            .collect();
        Ok(RatMatrix::new(self.rows, self.cols, data))
    }

    /// All `order × order` minors, row subsets outer and column subsets inner,
    /// both in lexicographic order.
    pub fn minors(&self, order: usize) -> Result<Vec<Poly>, PolyError> {
        let max = self.rows.min(self.cols);
        if order == 0 || order > max {
            return Err(PolyError::MinorOrder { order, max });
        }
        let row_sets = subsets(self.rows, order);
        let col_sets = subsets(self.cols, order);
        let mut out = Vec::with_capacity(row_sets.len() * col_sets.len());
        for rs in &row_sets {
            for cs in &col_sets {
                out.push(self.det_of(rs, cs));
            }
        }
        Ok(out)
    }

    /// Laplace expansion along the first selected row.
    fn det_of(&self, rows: &[usize], cols: &[usize]) -> Poly {
        if rows.len() == 1 {
            return self.get(rows[0], cols[0]).clone();
        }
        let mut acc = Poly::zero(self.nvars);
        let rest_rows = &rows[1..];
        for (k, &c) in cols.iter().enumerate() {
            let entry = self.get(rows[0], c);
            if entry.is_zero() {
                continue;
            }
            let rest_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let term = entry * &self.det_of(rest_rows, &rest_cols);
            acc = if k % 2 == 0 { &acc + &term } else { &acc - &term };
        }
        acc
    }

    /// Determinant of a square matrix.
    pub fn determinant(&self) -> Result<Poly, PolyError> {
        self.require_square()?;
        if self.rows == 0 {
            return Ok(Poly::one(self.nvars));
        }
        let idx: Vec<usize> = (0..self.rows).collect();
        Ok(self.det_of(&idx, &idx))
    }

    /// Divides every entry by the positive rational gcd of all coefficients.
    /// Returns the normalized matrix and the removed scalar; the zero matrix
    /// comes back unchanged with scalar one.
    pub fn content_normalize(&self) -> (PolyMatrix, Rational) {
        let content = rational_gcd(self.entries.iter().flat_map(|p| p.coefficients()));
        if content.is_one() {
            return (self.clone(), content);
        }
        let inv = content.recip();
        (self.scale(&inv), content)
    }

    /// Characteristic coefficients by the Faddeev–LeVerrier recursion:
    /// `M_1 = Id`, `a_k = −tr(H M_k)/k`, `M_{k+1} = H M_k + a_k Id`.
    pub fn char_poly_faddeev(&self) -> Result<CharPoly, PolyError> {
        self.require_square()?;
        let n = self.rows;
        let id = PolyMatrix::identity(n, self.nvars);
        let mut coeffs = vec![Poly::one(self.nvars)];
        let mut chain = Vec::with_capacity(n);
        let mut m = id.clone();
        for k in 1..=n {
            let hm = self.checked_mul(&m)?;
            let a_k = hm.trace()?.scale(&-int(k as i64).recip());
            let next = hm.checked_add(&id.scale_poly(&a_k))?;
            chain.push(std::mem::replace(&mut m, next));
            coeffs.push(a_k);
        }
        Ok(CharPoly { coeffs, chain })
    }

    /// Renders entries as `[[p, q], [r, s]]` for reports.
    pub fn display_rows(&self) -> String {
        let rows: Vec<String> = (0..self.rows)
            .map(|i| {
                let cells: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect();
        format!("[{}]", rows.join(", "))
    }

    /// Coefficient matrix of `ξ^alpha` across all entries.
    pub fn coefficient_matrix(&self, alpha: &MultiIndex) -> RatMatrix {
        RatMatrix::new(
            self.rows,
            self.cols,
            self.entries.iter().map(|p| p.coeff(alpha)).collect(),
        )
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

impl fmt::Display for PolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::{int, rat};

    fn x(i: usize) -> Poly {
        Poly::var(2, i)
    }

    fn div2() -> PolyMatrix {
        PolyMatrix::from_rows(2, vec![vec![x(0), x(1)]]).unwrap()
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
    fn row_times_its_transpose() {
        let m = div2();
        let h = m.checked_mul(&m.transpose()).unwrap();
        assert_eq!(h.shape(), (1, 1));
        assert_eq!(h.get(0, 0), &(&x(0).pow(2) + &x(1).pow(2)));
    }

    #[test]
    fn shape_errors() {
        let m = div2();
        assert!(matches!(m.checked_mul(&m), Err(PolyError::ShapeMismatch { .. })));
        assert!(m.checked_add(&m.transpose()).is_err());
        assert!(matches!(m.char_poly_faddeev(), Err(PolyError::NotSquare { .. })));
    }

    #[test]
    fn transpose_involution_and_identity() {
        let m = perp();
        assert_eq!(m.transpose().transpose(), m);
        let id = PolyMatrix::identity(2, 2);
        assert_eq!(m.checked_mul(&id).unwrap(), m);
    }

    #[test]
    fn faddeev_one_by_one() {
        let h = div2().checked_mul(&div2().transpose()).unwrap();
        let cp = h.char_poly_faddeev().unwrap();
        assert_eq!(cp.coeffs[1], -&(&x(0).pow(2) + &x(1).pow(2)));
        assert_eq!(cp.generic_rank(), 1);
    }

    #[test]
    fn faddeev_rank_one_gram() {
        let g = div2().transpose();
        let h = g.checked_mul(&g.transpose()).unwrap();
        let cp = h.char_poly_faddeev().unwrap();
        assert_eq!(cp.coeffs[1], -&(&x(0).pow(2) + &x(1).pow(2)));
        assert!(cp.coeffs[2].is_zero());
        assert_eq!(cp.generic_rank(), 1);
    }

    #[test]
    fn faddeev_identity() {
        let cp = PolyMatrix::identity(3, 2).char_poly_faddeev().unwrap();
        let got: Vec<Poly> = cp.coeffs.clone();
        let want: Vec<Poly> = [1, -3, 3, -1].iter().map(|&c| Poly::constant(2, int(c))).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn minors_examples() {
        assert_eq!(div2().minors(1).unwrap(), vec![x(0), x(1)]);
        assert_eq!(perp().minors(2).unwrap(), vec![Poly::zero(2)]);
        assert_eq!(
            PolyMatrix::identity(2, 2).minors(2).unwrap(),
            vec![Poly::one(2)]
        );
        assert!(matches!(div2().minors(2), Err(PolyError::MinorOrder { order: 2, max: 1 })));
    }

    #[test]
    fn minor_ordering_is_lexicographic() {
        let m = PolyMatrix::from_fn(3, 3, 1, |i, j| Poly::constant(1, int((3 * i + j) as i64)));
        let ms = m.minors(2).unwrap();
        assert_eq!(ms.len(), 9);
        // rows {0,1}, cols {0,1}: 0*4 - 1*3
        assert_eq!(ms[0], Poly::constant(1, int(-3)));
        // rows {0,1}, cols {0,2}: 0*5 - 2*3
        assert_eq!(ms[1], Poly::constant(1, int(-6)));
    }

    #[test]
    fn evaluation_examples() {
        let v = div2().eval_rational(&[int(3), int(4)]).unwrap();
        assert_eq!(v, RatMatrix::new(1, 2, vec![int(3), int(4)]));
        let p = perp().eval_rational(&[int(1), int(0)]).unwrap();
        assert_eq!(p, RatMatrix::new(2, 2, vec![int(0), int(0), int(0), int(-1)]));
        let z = perp().eval_rational(&[int(0), int(0)]).unwrap();
        assert!(z.is_zero());
        assert!(matches!(
            perp().eval_rational(&[int(1)]),
            Err(PolyError::PointLength { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn content_examples() {
        let m = PolyMatrix::from_rows(2, vec![vec![x(0).scale(&int(2)), x(1).scale(&int(4))]]).unwrap();
        let (n, c) = m.content_normalize();
        assert_eq!(c, int(2));
        assert_eq!(n, PolyMatrix::from_rows(2, vec![vec![x(0), x(1).scale(&int(2))]]).unwrap());

        let m = PolyMatrix::from_rows(2, vec![vec![x(0).scale(&rat(1, 2)), x(1).scale(&rat(1, 3))]]).unwrap();
        let (n, c) = m.content_normalize();
        assert_eq!(c, rat(1, 6));
        assert_eq!(
            n,
            PolyMatrix::from_rows(2, vec![vec![x(0).scale(&int(3)), x(1).scale(&int(2))]]).unwrap()
        );

        let z = PolyMatrix::zeros(2, 2, 2);
        assert_eq!(z.content_normalize(), (z.clone(), int(1)));
    }

    #[test]
    fn homogeneous_degree_detection() {
        assert_eq!(perp().homogeneous_degree(), Ok(Some(2)));
        let mixed = PolyMatrix::from_rows(2, vec![vec![x(0), x(1).pow(2)]]).unwrap();
        assert_eq!(mixed.homogeneous_degree(), Err((0, 1)));
        assert_eq!(PolyMatrix::zeros(1, 1, 2).homogeneous_degree(), Ok(None));
    }
}
