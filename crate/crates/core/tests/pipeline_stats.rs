use std::f64::consts::PI;

use apot_core::afree::{
    compactify_sequence, standard_moments, ym_moments, CompactifiedField, MomentOptions, PipelineParams, Region,
    TestFunction,
};
use apot_core::diffop::DiffOp;
use apot_core::exactness::potential;
use apot_core::spectral::SpatialField;

fn oscillations(m: usize) -> Vec<SpatialField> {
    [1, 2, 4]
        .iter()
        .map(|&j| SpatialField::from_fn(2, m, 2, move |x| vec![0.0, (2.0 * PI * j as f64 * x[0]).sin()]))
        .collect()
}

fn moment_errors(w: &SpatialField, out: &CompactifiedField) -> f64 {
    let tests = standard_moments(2);
    let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t as &dyn TestFunction).collect();
    let opts = MomentOptions {
        region: Region::Inner(out.margin),
        ..MomentOptions::default()
    };
    let a = ym_moments(std::slice::from_ref(w), &refs, &opts).unwrap();
    let b = ym_moments(std::slice::from_ref(&out.field), &refs, &opts).unwrap();
    a.elements[0]
        .moments
        .iter()
        .zip(&b.elements[0].moments)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn run(m: usize) -> (Vec<SpatialField>, Vec<CompactifiedField>) {
    let div = DiffOp::builtin("div", 2).unwrap();
    let b = potential(&div).unwrap();
    let ws = oscillations(m);
    let out = compactify_sequence(&div, &b, &ws, &PipelineParams::default()).unwrap();
    (ws, out.fields)
}

#[test]
fn outputs_vanish_on_band_and_keep_statistics() {
    let (ws64, out64) = run(64);
    let (ws128, out128) = run(128);
    for (f, w) in out128.iter().zip(&ws128) {
        for p in 0..f.field.npoints() {
            let x = f.field.coords(p);
            let dist = x.iter().map(|&v| v.min(1.0 - v)).fold(1.0, f64::min);
            if dist <= f.band() {
                assert!(f.field.point(p).iter().all(|&v| v == 0.0));
                assert!(f.potential.point(p).iter().all(|&v| v == 0.0));
            }
        }
        assert!(f.inner_residual <= 1e-8);
        assert!(moment_errors(w, f) <= 5e-2);
    }
    for ((w64, f64_), (w128, f128)) in ws64.iter().zip(&out64).zip(ws128.iter().zip(&out128)) {
        assert!(moment_errors(w128, f128) < moment_errors(w64, f64_));
    }
}

#[test]
fn user_ladder_truncates() {
    let div = DiffOp::builtin("div", 2).unwrap();
    let b = potential(&div).unwrap();
    let ws = oscillations(32);
    let params = PipelineParams {
        alphas: Some(vec![0.5, 0.5, 0.5]),
        ..PipelineParams::default()
    };
    let out = compactify_sequence(&div, &b, &ws, &params).unwrap();
    assert!(!out.default_ladder);
    assert!(out.fields.iter().all(|f| f.alpha == 0.5));
    let bad = PipelineParams {
        alphas: Some(vec![1.0]),
        ..PipelineParams::default()
    };
    assert!(compactify_sequence(&div, &b, &ws, &bad).is_err());
}
