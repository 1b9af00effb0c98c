mod common;

use apot_core::polymat::{MultiIndex, Poly, PolyMatrix};
use common::*;
use num::Signed;
use proptest::prelude::*;

fn arb_poly() -> impl Strategy<Value = Poly> {
    prop::collection::vec(((0u32..3, 0u32..3), -6i64..=6, 1i64..=5), 0..5).prop_map(|terms| {
        Poly::from_terms(
            2,
            terms
                .into_iter()
                .map(|((a, b), n, d)| (MultiIndex::new(vec![a, b]), apot_core::polymat::rat(n, d))),
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn ring_axioms(p in arb_poly(), q in arb_poly(), r in arb_poly()) {
        prop_assert_eq!(&(&p * &q) * &r, &p * &(&q * &r));
        prop_assert_eq!(&(&p + &q) + &r, &p + &(&q + &r));
        prop_assert_eq!(&p * &(&q + &r), &(&p * &q) + &(&p * &r));
        prop_assert_eq!(&p * &q, &q * &p);
        prop_assert_eq!(&p + &q, &q + &p);
        prop_assert!((&p - &p).is_zero());
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(p in arb_poly(), q in arb_poly(), a in -20i64..20, b in 1i64..9) {
        let pt = [apot_core::polymat::rat(a, b), apot_core::polymat::rat(b, 3)];
        let prod = (&p * &q).eval(&pt).unwrap();
        prop_assert_eq!(prod, p.eval(&pt).unwrap() * q.eval(&pt).unwrap());
        let sum = (&p + &q).eval(&pt).unwrap();
        prop_assert_eq!(sum, p.eval(&pt).unwrap() + q.eval(&pt).unwrap());
    }
}

#[test]
fn faddeev_matches_leibniz_expansion() {
    let mut rng = rng(20);
    for trial in 0..20 {
        let size = 1 + trial % 4;
        let h = random_matrix(&mut rng, size, size, 2, 2);
        let fl = h.char_poly_faddeev().unwrap();
        let oracle = char_coeffs_by_expansion(&h);
        assert_eq!(fl.coeffs, oracle, "trial {trial}, size {size}");
    }
}

#[test]
fn faddeev_chain_satisfies_cayley_hamilton() {
    let mut rng = rng(3);
    let h = random_matrix(&mut rng, 3, 3, 2, 1);
    let cp = h.char_poly_faddeev().unwrap();
    // M_{N+1} = H M_N + a_N Id vanishes identically.
    let next = h
        .checked_mul(cp.chain_matrix(3))
        .unwrap()
        .checked_add(&PolyMatrix::identity(3, 2).scale_poly(&cp.coeffs[3]))
        .unwrap();
    assert!(next.is_zero());
}

#[test]
fn gram_coefficients_alternate_in_sign() {
    let mut rng = rng(100);
    for _ in 0..10 {
        let m = random_matrix(&mut rng, 3, 2, 2, 2);
        let h = m.checked_mul(&m.transpose()).unwrap();
        let cp = h.char_poly_faddeev().unwrap();
        for _ in 0..10 {
            let pt = random_point(&mut rng, 2);
            for (j, a) in cp.coeffs.iter().enumerate() {
                let v = a.eval(&pt).unwrap();
                let e = if j % 2 == 0 { v } else { -v };
                assert!(!e.is_negative(), "e_{j} negative at {pt:?}");
            }
        }
    }
}

#[test]
fn laplace_determinant_matches_leibniz() {
    let mut rng = rng(5);
    for size in 1..=4 {
        let m = random_matrix(&mut rng, size, size, 2, 1);
        let rows: Vec<Vec<Poly>> = (0..size).map(|i| (0..size).map(|j| m.get(i, j).clone()).collect()).collect();
        assert_eq!(m.determinant().unwrap(), leibniz_det(&rows, 2));
        assert_eq!(m.minors(size).unwrap(), vec![m.determinant().unwrap()]);
    }
    assert!(PolyMatrix::zeros(2, 2, 2).determinant().unwrap().is_zero());
}
