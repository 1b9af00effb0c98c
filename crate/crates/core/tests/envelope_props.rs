use apot_core::diffop::DiffOp;
use apot_core::envelope::{estimate_envelope, parse_integrand};
use proptest::prelude::*;

fn quadratic_text(q: &[[i32; 2]; 2]) -> String {
    format!("quadratic([[{}, {}], [{}, {}]])", q[0][0], q[0][1], q[1][0], q[1][1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn never_exceeds_f_eta(
        c in proptest::array::uniform3(-3i32..=3),
        eta in proptest::array::uniform2(-2.0f64..2.0),
        seed in 0u64..1000,
    ) {
        let f = parse_integrand(&format!("{}*w1^2 + {}*w1*w2 + {}*w2^4", c[0], c[1], c[2])).unwrap();
        let b = DiffOp::builtin("grad_scalar", 2).unwrap();
        let est = estimate_envelope(&f, &eta, &b, 25, seed).unwrap();
        prop_assert!(est.value <= est.f_eta);
        prop_assert_eq!(est.f_eta, f.eval(&eta));
    }

    #[test]
    fn psd_quadratic_envelope_is_f_eta(
        l in proptest::array::uniform3(-3i32..=3),
        eta in proptest::array::uniform2(-2.0f64..2.0),
        seed in 0u64..1000,
    ) {
        // Q = L Lᵀ with L lower triangular.
        let q = [
            [l[0] * l[0], l[0] * l[1]],
            [l[0] * l[1], l[1] * l[1] + l[2] * l[2]],
        ];
        let f = parse_integrand(&quadratic_text(&q)).unwrap();
        let b = DiffOp::builtin("grad_scalar", 2).unwrap();
        let est = estimate_envelope(&f, &eta, &b, 25, seed).unwrap();
        prop_assert!((est.value - est.f_eta).abs() <= 1e-9 * (1.0 + est.f_eta.abs()));
    }
}
