#![allow(dead_code)]

use apot_core::polymat::{rat, MultiIndex, Poly, PolyMatrix, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random polynomial with total degree ≤ `max_deg` and small rational coefficients.
pub fn random_poly(rng: &mut impl Rng, nvars: usize, max_deg: u32, max_terms: usize) -> Poly {
    let nterms = rng.gen_range(0..=max_terms);
    let terms = (0..nterms).map(|_| {
        let deg = rng.gen_range(0..=max_deg);
        let mut e = vec![0u32; nvars];
        for _ in 0..deg {
            e[rng.gen_range(0..nvars)] += 1;
        }
        let c = rat(rng.gen_range(-5..=5), rng.gen_range(1..=4));
        (MultiIndex::new(e), c)
    });
    Poly::from_terms(nvars, terms).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, nvars: usize, max_deg: u32) -> PolyMatrix {
    PolyMatrix::from_fn(rows, cols, nvars, |_, _| random_poly(rng, nvars, max_deg, 3))
}

/// Random homogeneous matrix of one degree (nonzero entries all of `deg`).
pub fn random_homogeneous(rng: &mut impl Rng, rows: usize, cols: usize, nvars: usize, deg: u32) -> PolyMatrix {
    let monos = MultiIndex::all_of_degree(nvars, deg);
    PolyMatrix::from_fn(rows, cols, nvars, |_, _| {
        let mut terms: Vec<(MultiIndex, Rational)> = Vec::new();
        for a in &monos {
            if rng.gen_bool(0.5) {
                terms.push((a.clone(), rat(rng.gen_range(-3..=3), 1)));
            }
        }
        Poly::from_terms(nvars, terms).unwrap()
    })
}

/// Random nonzero rational point with numerators/denominators in [-100, 100] \ {0}.
pub fn random_point(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    fn draw(rng: &mut impl Rng) -> i64 {
        loop {
            let v: i64 = rng.gen_range(-100..=100);
            if v != 0 {
                return v;
            }
        }
    }
    (0..n).map(|_| rat(draw(rng), draw(rng))).collect()
}

/// Leibniz-formula determinant; independent of the Faddeev and Laplace code paths.
pub fn leibniz_det(m: &[Vec<Poly>], nvars: usize) -> Poly {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = Poly::zero(nvars);
    permute(&mut perm, 0, &mut |p| {
        let inversions = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| p[i] > p[j])
            .count();
        let mut term = Poly::one(nvars);
        for (i, &j) in p.iter().enumerate() {
            term = &term * &m[i][j];
        }
        total = if inversions % 2 == 0 { &total + &term } else { &total - &term };
    });
    total
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Characteristic coefficients `a_j` of `det(λ·Id − h)` by Leibniz expansion in
/// an extra variable λ.
pub fn char_coeffs_by_expansion(h: &PolyMatrix) -> Vec<Poly> {
    let n = h.rows();
    let nv = h.nvars();
    let lift = |p: &Poly| {
        Poly::from_terms(
            nv + 1,
            p.terms().map(|(a, c)| {
                let mut e = a.exponents().to_vec();
                e.push(0);
                (MultiIndex::new(e), c.clone())
            }),
        )
        .unwrap()
    };
    let lambda = Poly::var(nv + 1, nv);
    let rows: Vec<Vec<Poly>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let e = lift(h.get(i, j));
                    if i == j {
                        &lambda - &e
                    } else {
                        -&e
                    }
                })
                .collect()
        })
        .collect();
    let det = leibniz_det(&rows, nv + 1);
    (0..=n)
        .map(|j| {
            let power = (n - j) as u32;
            Poly::from_terms(
                nv,
                det.terms()
                    .filter(|(a, _)| a.exponents()[nv] == power)
                    .map(|(a, c)| (MultiIndex::new(a.exponents()[..nv].to_vec()), c.clone())),
            )
            .unwrap()
        })
        .collect()
}
