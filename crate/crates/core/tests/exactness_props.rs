mod common;

use apot_core::diffop::{DiffOp, BUILTIN_NAMES};
use apot_core::exactness::{
    annihilator, certify_constant_rank, potential, pseudoinverse_symbol, verify_exact_pair, Certificate,
};
use apot_core::polymat::{PolyMatrix, Rational};
use common::*;
use num::Zero;

/// Gaussian elimination over the rationals, independent of the library's Bareiss.
fn rank_oracle(m: &PolyMatrix, xi: &[Rational]) -> usize {
    let mut a: Vec<Vec<Rational>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j).eval(xi).unwrap()).collect())
        .collect();
    let mut rank = 0;
    for col in 0..m.cols() {
        let Some(p) = (rank..a.len()).find(|&r| !a[r][col].is_zero()) else { continue };
        a.swap(rank, p);
        for r in 0..a.len() {
            if r != rank && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[rank][col];
                for c in 0..m.cols() {
                    let v = &a[rank][c] * &f;
                    a[r][c] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn check_penrose(m: &PolyMatrix) {
    let (n, e) = pseudoinverse_symbol(m);
    let mn = m.checked_mul(&n).unwrap();
    let nm = n.checked_mul(m).unwrap();
    assert_eq!(mn.checked_mul(m).unwrap(), m.scale_poly(&e), "M N M = e M");
    assert_eq!(nm.checked_mul(&n).unwrap(), n.scale_poly(&e), "N M N = e N");
    assert_eq!(mn.transpose(), mn, "(M N)* = M N");
    assert_eq!(nm.transpose(), nm, "(N M)* = N M");
}

fn builtin_cases() -> Vec<DiffOp> {
    let mut out = Vec::new();
    for name in BUILTIN_NAMES {
        for n in 2..=3 {
            if let Ok(op) = DiffOp::builtin(name, n) {
                out.push(op);
            }
        }
    }
    out
}

#[test]
fn penrose_identities_for_builtins() {
    for op in builtin_cases() {
        check_penrose(&op.symbol());
    }
}

#[test]
fn penrose_identities_for_random_symbols() {
    let mut r = rng(31);
    for t in 0..20 {
        let rows = 1 + t % 3;
        let cols = 1 + (t / 3) % 3;
        let m = random_matrix(&mut r, rows, cols, 2, 2);
        check_penrose(&m);
    }
}

#[test]
fn synthesized_potentials_match_rank_oracle() {
    let mut r = rng(5);
    for (name, n) in [
        ("grad_scalar", 2),
        ("grad_scalar", 3),
        ("div", 2),
        ("div", 3),
        ("curl3d", 3),
        ("symgrad", 2),
    ] {
        let a = DiffOp::builtin(name, n).unwrap();
        let b = potential(&a).unwrap();
        assert_eq!(b.dim_to(), a.dim_from());
        assert!(a.symbol().checked_mul(&b.symbol()).unwrap().is_zero(), "{name}");
        for _ in 0..20 {
            let xi = random_point(&mut r, n);
            let ra = rank_oracle(&a.symbol(), &xi);
            let rb = rank_oracle(&b.symbol(), &xi);
            assert_eq!(ra + rb, a.dim_from(), "{name} at {xi:?}");
        }
        verify_exact_pair(&a, &b, 30, 1).unwrap();
    }
}

#[test]
fn annihilator_of_synthesized_potential_is_exact() {
    for (name, n) in [("div", 2), ("div", 3), ("curl3d", 3), ("grad_scalar", 3)] {
        let a = DiffOp::builtin(name, n).unwrap();
        let b = potential(&a).unwrap();
        let a2 = annihilator(&b).unwrap();
        verify_exact_pair(&a2, &b, 30, 2).unwrap();
    }
}

#[test]
fn random_constant_rank_products() {
    // A = C·div with C invertible constant keeps constant rank.
    let mut r = rng(2);
    let div = DiffOp::builtin("div", 3).unwrap();
    for _ in 0..3 {
        let c = loop {
            let c = random_matrix(&mut r, 2, 1, 3, 0);
            if !c.is_zero() {
                break c;
            }
        };
        let sym = c.checked_mul(&div.symbol()).unwrap();
        let a = DiffOp::from_symbol(&sym, Some(1)).unwrap();
        assert!(matches!(certify_constant_rank(&a, 8), Certificate::Certified { .. }));
        let b = potential(&a).unwrap();
        verify_exact_pair(&a, &b, 20, 4).unwrap();
    }
}
