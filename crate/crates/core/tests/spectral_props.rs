use apot_core::diffop::DiffOp;
use apot_core::exactness::potential;
use apot_core::spectral::{
    apply_diffop, project_afree, random_field, recover_potential, Band, Projector, TorusField,
};
use proptest::prelude::*;

fn constant_rank_builtins() -> Vec<(&'static str, usize)> {
    vec![
        ("grad_scalar", 2),
        ("grad_scalar", 3),
        ("div", 2),
        ("div", 3),
        ("curl3d", 3),
        ("symgrad", 2),
    ]
}

fn grid(n: usize) -> usize {
    if n == 2 {
        16
    } else {
        8
    }
}

#[test]
fn exact_projector_is_symmetric_idempotent() {
    for (name, n) in constant_rank_builtins() {
        let a = DiffOp::builtin(name, n).unwrap();
        let p = Projector::new(&a);
        let freqs: Vec<Vec<i64>> = if n == 2 {
            vec![vec![1, 0], vec![3, -2], vec![-7, 5]]
        } else {
            vec![vec![1, 0, 0], vec![2, -1, 3], vec![-4, 4, 1]]
        };
        for xi in freqs {
            let m = p.exact_at(&xi).unwrap();
            assert_eq!(m.mul(&m), m, "{name} {xi:?}");
            assert_eq!(m.transpose(), m, "{name} {xi:?}");
        }
    }
}

#[test]
fn projection_properties_for_builtins() {
    for (name, n) in constant_rank_builtins() {
        let a = DiffOp::builtin(name, n).unwrap();
        let m = grid(n);
        let w = random_field(n, m, a.dim_from(), Band { max_abs: (m / 2 - 1) as i64, include_zero: true }, 17).unwrap();
        let pw = project_afree(&a, &w).unwrap();
        let ppw = project_afree(&a, &pw).unwrap();
        assert!(ppw.sub(&pw).unwrap().l2_norm() <= 1e-10 * w.l2_norm(), "{name}");
        let apw = apply_diffop(&a, &pw).unwrap().inverse().l2_norm();
        assert!(apw <= 1e-8 * w.inverse().l2_norm(), "{name}: {apw}");
        let rest = w.sub(&pw).unwrap();
        let split = pw.l2_norm().powi(2) + rest.l2_norm().powi(2);
        assert!((split - w.l2_norm().powi(2)).abs() <= 1e-9 * w.l2_norm().powi(2), "{name}");
    }
}

#[test]
fn recovery_round_trip_for_builtins() {
    for (name, n) in constant_rank_builtins() {
        let a = DiffOp::builtin(name, n).unwrap();
        let b = potential(&a).unwrap();
        let m = grid(n);
        let band = Band { max_abs: (m / 2 - 1) as i64, include_zero: false };
        let w = project_afree(&a, &random_field(n, m, a.dim_from(), band, 23).unwrap()).unwrap();
        let u = recover_potential(&b, &w, false).unwrap();
        let bu = apply_diffop(&b, &u).unwrap();
        let rel = bu.sub(&w).unwrap().l2_norm() / w.l2_norm().max(f64::MIN_POSITIVE);
        assert!(rel <= 1e-8, "{name}: {rel}");
    }
}

#[test]
fn recovery_of_gradient_fields() {
    // grad is its own potential for curl-free fields: recover(grad, grad f) = f − mean f.
    let grad = DiffOp::builtin("grad_scalar", 2).unwrap();
    let f = random_field(2, 16, 1, Band { max_abs: 5, include_zero: false }, 8).unwrap();
    let g = apply_diffop(&grad, &f).unwrap();
    let back = recover_potential(&grad, &g, false).unwrap();
    assert!(back.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_and_round_trip(seed in any::<u64>(), k in 1i64..7, d in 1usize..4) {
        let t = random_field(2, 16, d, Band { max_abs: k, include_zero: true }, seed).unwrap();
        let s = t.inverse();
        prop_assert!((s.l2_norm() - t.l2_norm()).abs() <= 1e-10 * t.l2_norm());
        let back = TorusField::transform(&s);
        prop_assert!(back.sub(&t).unwrap().l2_norm() <= 1e-12 * t.l2_norm());
    }

    #[test]
    fn projection_is_contractive(seed in any::<u64>()) {
        let a = DiffOp::builtin("div", 2).unwrap();
        let w = random_field(2, 8, 2, Band { max_abs: 3, include_zero: true }, seed).unwrap();
        let pw = project_afree(&a, &w).unwrap();
        prop_assert!(pw.l2_norm() <= w.l2_norm() * (1.0 + 1e-12));
        prop_assert!(pw.max_hermitian_defect() <= 1e-12);
    }
}
