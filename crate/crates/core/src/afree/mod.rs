//! Turning an A-free oscillating sequence into compactly supported potentials
//! with the same statistics: truncation, cutoff and mollification (stage 1),
//! projection (stage 2), recovery and a second cutoff (stage 3), plus
//! moment diagnostics.

mod cutoff;
mod moments;

use std::collections::HashMap;

use thiserror::Error;

use crate::diffop::DiffOp;
use crate::spectral::{derivative, derivative_norm, Projector, SpatialField, SpectralError, TorusField};
pub use cutoff::{CutoffProfile, Smoothstep};
pub use moments::{
    standard_moments, ym_moments, ElementDiagnostics, Monomial, MomentOptions, Region, SequenceDiagnostics,
    TestFunction,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AfreeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mollifier radius {eps} is below two grid spacings ({min})")]
    MollifierTooSmall { eps: f64, min: f64 },
    #[error("A·B is not identically zero; the operators are not an exact pair")]
    NotExactPair,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Radial truncation `τ_α`: vectors longer than `α` are scaled back to length `α`.
pub fn truncate(w: &SpatialField, alpha: f64) -> SpatialField {
    assert!(alpha > 0.0, "truncation level must be positive");
    let mut out = w.clone();
    for p in 0..out.npoints() {
        let v = out.point_mut(p);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > alpha {
            let s = alpha / norm;
            v.iter_mut().for_each(|x| *x *= s);
        }
    }
    out
}

/// `s = max_m ‖D^{l−m}u‖^{1/(2m)}` over `norms[m−1] = ‖D^{l−m}u‖`, clamped
/// to at most 1/4; `min_margin` when every norm vanishes.
pub fn cutoff_scale(norms: &[f64], min_margin: f64) -> f64 {
    assert!(norms.iter().all(|&v| v >= 0.0), "norms must be nonnegative");
    let s = norms
        .iter()
        .enumerate()
        .map(|(i, &v)| v.powf(1.0 / (2.0 * (i + 1) as f64)))
        .fold(0.0, f64::max);
    if s == 0.0 {
        min_margin
    } else {
        s.min(0.25)
    }
}

pub fn smooth_cutoff(w: &SpatialField, profile: &CutoffProfile) -> SpatialField {
    let mut out = w.clone();
    for p in 0..out.npoints() {
        let r = profile.value(&w.coords(p));
        out.point_mut(p).iter_mut().for_each(|x| *x *= r);
    }
    out
}

/// Periodic convolution with the normalized bump `(1 − r²/ε²)³` on `r < ε`.
pub fn mollify(w: &SpatialField, eps: f64) -> Result<SpatialField, AfreeError> {
    let (n, m, d) = (w.n(), w.m(), w.d());
    let h = 1.0 / m as f64;
    if eps < 2.0 * h * (1.0 - 1e-12) {
        return Err(AfreeError::MollifierTooSmall { eps, min: 2.0 * h });
    }
    let reach = (eps / h).ceil() as i64;
    let width = (2 * reach + 1) as usize;
    let mut kernel: Vec<(Vec<i64>, f64)> = Vec::new();
    for code in 0..width.pow(n as u32) {
        let mut c = code;
        let offset: Vec<i64> = (0..n)
            .map(|_| {
                let v = (c % width) as i64 - reach;
                c /= width;
                v
            })
            .collect();
        let r2 = offset.iter().map(|&o| (o as f64 * h).powi(2)).sum::<f64>();
        if r2 < eps * eps {
            kernel.push((offset, (1.0 - r2 / (eps * eps)).powi(3)));
        }
    }
    let total: f64 = kernel.iter().map(|(_, k)| k).sum();
    let mi = m as i64;
    let mut out = SpatialField::zeros(n, m, d);
    for p in 0..w.npoints() {
        let idx = w.grid_index(p);
        let mut acc = vec![0.0; d];
        for (offset, k) in &kernel {
            let q = idx
                .iter()
                .zip(offset)
                .fold(0usize, |q, (&i, &o)| q * m + (i as i64 - o).rem_euclid(mi) as usize);
            for (a, v) in acc.iter_mut().zip(w.point(q)) {
                *a += k * v;
            }
        }
        for (slot, a) in out.point_mut(p).iter_mut().zip(acc) {
            *slot = a / total;
        }
    }
    Ok(out)
}

/// `B(ρu)` by the Leibniz rule, with `∂^γ u` spectral and `∂^β ρ` in closed
/// form, so the result vanishes wherever every derivative of `ρ` does.
pub fn apply_with_cutoff(b: &DiffOp, profile: &CutoffProfile, u: &TorusField) -> Result<SpatialField, AfreeError> {
    if u.d() != b.dim_from() || u.n() != b.n() {
        return Err(SpectralError::FiberMismatch {
            expected: b.dim_from(),
            got: u.d(),
        }
        .into());
    }
    if b.order() > profile.order() {
        return Err(AfreeError::InvalidParameter(format!(
            "cutoff of smoothness {} cannot carry an operator of order {}",
            profile.order(),
            b.order()
        )));
    }
    let n = b.n();
    let rows = b.dim_to();
    let cols = b.dim_from();
    let mut out = SpatialField::zeros(n, u.m(), rows);
    let mut cache: HashMap<Vec<u32>, SpatialField> = HashMap::new();
    let coords: Vec<Vec<f64>> = (0..out.npoints()).map(|p| out.coords(p)).collect();
    for (alpha, mat) in b.coeffs() {
        let mat = mat.to_f64();
        for beta in sub_indices(alpha.exponents()) {
            let gamma: Vec<u32> = alpha.exponents().iter().zip(&beta).map(|(a, b)| a - b).collect();
            let weight: f64 = alpha
                .exponents()
                .iter()
                .zip(&beta)
                .map(|(&a, &b)| binomial(a, b))
                .product();
            let du = cache
                .entry(gamma.clone())
                .or_insert_with(|| derivative(u, &gamma).inverse());
            for (p, x) in coords.iter().enumerate() {
                let r = profile.derivative(x, &beta);
                if r == 0.0 {
                    continue;
                }
                let s = weight * r;
                let v = du.point(p).to_vec();
                let slot = out.point_mut(p);
                for i in 0..rows {
                    let mut acc = 0.0;
                    for j in 0..cols {
                        acc += mat[i * cols + j] * v[j];
                    }
                    slot[i] += s * acc;
                }
            }
        }
    }
    Ok(out)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn sub_indices(alpha: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &a in alpha {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                (0..=a).map(move |b| {
                    let mut v = prefix.clone();
                    v.push(b);
                    v
                })
            })
            .collect();
    }
    out
}

/// Pipeline parameters; lengths are in units of the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    /// Truncation levels; the default ladder is `‖w_j‖_{L²} · base · growth^j`.
    pub alphas: Option<Vec<f64>>,
    pub alpha_base: f64,
    pub alpha_growth: f64,
    /// Stage-1 cutoff margin; default 8 grid spacings.
    pub step1_margin: Option<f64>,
    /// Mollifier radius; default 2 grid spacings.
    pub mollifier: Option<f64>,
    /// Smallest stage-3 margin; default 4 grid spacings.
    pub min_margin: Option<f64>,
    /// Remove the mean of the projected field before recovery.
    pub subtract_mean: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            alphas: None,
            alpha_base: 4.0,
            alpha_growth: 2.0,
            step1_margin: None,
            mollifier: None,
            min_margin: None,
            subtract_mean: true,
        }
    }
}

/// One processed element of the sequence.
#[derive(Debug, Clone)]
pub struct CompactifiedField {
    pub alpha: f64,
    pub step1_margin: f64,
    pub mollifier: f64,
    /// Stage-3 margin `s_j`; the outputs vanish within `s_j/2` of the boundary.
    pub margin: f64,
    pub cutoff_constant: f64,
    pub mean_removed: Vec<f64>,
    /// `ρ_j u_j`.
    pub potential: SpatialField,
    /// `B(ρ_j u_j)`.
    pub field: SpatialField,
    /// Relative `L²` size of `A(B u_j)` where `ρ_j = 1`.
    pub inner_residual: f64,
}

impl CompactifiedField {
    /// Width of the band where `potential` and `field` are exactly zero.
    pub fn band(&self) -> f64 {
        0.5 * self.margin
    }
}

#[derive(Debug, Clone)]
pub struct CompactifyOutput {
    pub fields: Vec<CompactifiedField>,
    /// Whether the truncation ladder was the built-in default.
    pub default_ladder: bool,
}

pub fn compactify_sequence(
    a: &DiffOp,
    b: &DiffOp,
    w_seq: &[SpatialField],
    params: &PipelineParams,
) -> Result<CompactifyOutput, AfreeError> {
    if a.dim_from() != b.dim_to() || a.n() != b.n() {
        return Err(AfreeError::NotExactPair);
    }
    if !a.symbol().checked_mul(&b.symbol()).map(|m| m.is_zero()).unwrap_or(false) {
        return Err(AfreeError::NotExactPair);
    }
    let Some(first) = w_seq.first() else {
        return Ok(CompactifyOutput {
            fields: Vec::new(),
            default_ladder: params.alphas.is_none(),
        });
    };
    let (n, m) = (first.n(), first.m());
    if n != a.n() {
        return Err(SpectralError::ShapeMismatch(format!("fields on T^{n}, operator on R^{}", a.n())).into());
    }
    let h = 1.0 / m as f64;
    let step1 = params.step1_margin.unwrap_or(8.0 * h);
    let eps = params.mollifier.unwrap_or(2.0 * h);
    let min_margin = params.min_margin.unwrap_or(4.0 * h);
    if eps >= 0.5 * step1 {
        return Err(AfreeError::InvalidParameter(format!(
            "mollifier radius {eps} must stay below half the stage-1 margin {step1}"
        )));
    }
    if let Some(alphas) = &params.alphas {
        if alphas.len() < w_seq.len() || alphas.iter().any(|&v| !(v > 0.0)) {
            return Err(AfreeError::InvalidParameter("need one positive truncation level per field".into()));
        }
    }
    let step1_profile = CutoffProfile::new(step1, a.order().max(1))?;
    let projector = Projector::new(a);
    let l = b.order();
    let mut fields = Vec::with_capacity(w_seq.len());
    for (j, w) in w_seq.iter().enumerate() {
        if (w.n(), w.m(), w.d()) != (n, m, a.dim_from()) {
            return Err(SpectralError::ShapeMismatch(format!("sequence element {j} has a different grid")).into());
        }
        let alpha = match &params.alphas {
            Some(v) => v[j],
            None => {
                let norm = w.l2_norm();
                let scale = if norm > 0.0 { norm } else { 1.0 };
                scale * params.alpha_base * params.alpha_growth.powi(j as i32)
            }
        };
        // Truncate, cut off, mollify.
        let w1 = mollify(&smooth_cutoff(&truncate(w, alpha), &step1_profile), eps)?;
        // Project.
        let mut pw = projector.apply(&TorusField::transform(&w1))?;
        let mean: Vec<f64> = pw.mean().iter().map(|z| z.re).collect();
        if params.subtract_mean {
            let zero = vec![0i64; n];
            if let Some(slot) = pw.coeff_mut(&zero) {
                slot.iter_mut().for_each(|z| *z = Default::default());
            }
        }
        // Recover, cut off again.
        let u = crate::spectral::recover_potential(b, &pw, false)?;
        let norms: Vec<f64> = (1..=l).map(|mm| derivative_norm(&u, l - mm)).collect();
        let margin = cutoff_scale(&norms, min_margin).max(min_margin);
        let profile = CutoffProfile::new(margin, l.max(1))?;
        let field = apply_with_cutoff(b, &profile, &u)?;
        let potential = smooth_cutoff(&u.inverse(), &profile);
        let inner_residual = inner_residual(a, b, &u, margin)?;
        fields.push(CompactifiedField {
            alpha,
            step1_margin: step1,
            mollifier: eps,
            margin,
            cutoff_constant: profile.constant(),
            mean_removed: if params.subtract_mean { mean } else { vec![0.0; a.dim_from()] },
            potential,
            field,
            inner_residual,
        });
    }
    Ok(CompactifyOutput {
        fields,
        default_ladder: params.alphas.is_none(),
    })
}

fn inner_residual(a: &DiffOp, b: &DiffOp, u: &TorusField, margin: f64) -> Result<f64, AfreeError> {
    let bu = crate::spectral::apply_diffop(b, u)?;
    let abu = crate::spectral::apply_diffop(a, &bu)?.inverse();
    let bu = bu.inverse();
    let region = Region::Inner(margin);
    let (mut num, mut den) = (0.0, 0.0);
    for p in 0..bu.npoints() {
        if !region.contains(&bu.coords(p)) {
            continue;
        }
        num += abu.point(p).iter().map(|v| v * v).sum::<f64>();
        den += bu.point(p).iter().map(|v| v * v).sum::<f64>();
    }
    Ok(if den == 0.0 { 0.0 } else { (num / den).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn truncate_examples() {
        let w = SpatialField::new(1, 1, 2, vec![3.0, 4.0]).unwrap();
        let t = truncate(&w, 2.0);
        assert!((t.values()[0] - 1.2).abs() < 1e-15 && (t.values()[1] - 1.6).abs() < 1e-15);
        assert_eq!(truncate(&w, 5.0), w);
        let z = SpatialField::zeros(2, 4, 2);
        assert_eq!(truncate(&z, 1.0), z);
    }

    #[test]
    fn cutoff_scale_examples() {
        assert!((cutoff_scale(&[0.01], 0.05) - 0.1).abs() < 1e-15);
        assert!((cutoff_scale(&[0.04, 1e-8], 0.05) - 0.2).abs() < 1e-12);
        assert_eq!(cutoff_scale(&[0.0, 0.0], 0.05), 0.05);
        assert_eq!(cutoff_scale(&[10.0], 0.05), 0.25);
        let mut last = f64::INFINITY;
        for k in 1..10 {
            let s = cutoff_scale(&[10f64.powi(-k)], 0.05);
            assert!(s < last);
            last = s;
        }
    }

    #[test]
    fn cutoff_of_constant() {
        let w = SpatialField::from_fn(2, 32, 1, |_| vec![1.0]);
        let p = CutoffProfile::new(0.25, 2).unwrap();
        let c = smooth_cutoff(&w, &p);
        for q in 0..c.npoints() {
            let x = c.coords(q);
            let dist = x.iter().map(|&v| v.min(1.0 - v)).fold(1.0, f64::min);
            if dist >= 0.25 {
                assert_eq!(c.point(q)[0], 1.0);
            }
            if dist <= 0.125 {
                assert_eq!(c.point(q)[0], 0.0);
            }
        }
    }

    #[test]
    fn mollify_examples() {
        let c = SpatialField::from_fn(2, 16, 1, |_| vec![2.5]);
        let mc = mollify(&c, 0.2).unwrap();
        assert!(mc.values().iter().all(|v| (v - 2.5).abs() < 1e-14));

        let w = SpatialField::from_fn(2, 32, 2, |x| vec![(2.0 * PI * x[0]).sin() + x[1], x[0] * x[0]]);
        let mw = mollify(&w, 0.1).unwrap();
        for (a, b) in w.mean().iter().zip(mw.mean()) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut spike = SpatialField::zeros(2, 32, 1);
        spike.point_mut(16 * 32 + 16)[0] = 1.0;
        let ms = mollify(&spike, 0.1).unwrap();
        let total: f64 = ms.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        for q in 0..ms.npoints() {
            let x = ms.coords(q);
            let r = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
            if r >= 0.1 {
                assert_eq!(ms.point(q)[0], 0.0);
            } else {
                assert!(ms.point(q)[0] > 0.0);
            }
        }
        assert!(matches!(mollify(&c, 0.1), Err(AfreeError::MollifierTooSmall { .. })));
    }

    #[test]
    fn leibniz_matches_spectral_on_interior() {
        let grad = DiffOp::builtin("grad_scalar", 2).unwrap();
        let u = TorusField::transform(&SpatialField::from_fn(2, 32, 1, |x| {
            vec![(2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()]
        }));
        let profile = CutoffProfile::new(0.25, 1).unwrap();
        let out = apply_with_cutoff(&grad, &profile, &u).unwrap();
        let exact = crate::spectral::apply_diffop(&grad, &u).unwrap().inverse();
        for p in 0..out.npoints() {
            let x = out.coords(p);
            let dist = x.iter().map(|&v| v.min(1.0 - v)).fold(1.0, f64::min);
            if dist >= 0.25 {
                for c in 0..2 {
                    assert!((out.point(p)[c] - exact.point(p)[c]).abs() < 1e-12);
                }
            }
            if dist <= 0.125 {
                assert!(out.point(p).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn leibniz_product_rule_in_band() {
        // ∂1(ρu) = ρ' u + ρ ∂1u, checked against closed forms.
        let grad = DiffOp::builtin("grad_scalar", 1).unwrap();
        let u = TorusField::transform(&SpatialField::from_fn(1, 64, 1, |x| vec![(2.0 * PI * x[0]).cos()]));
        let profile = CutoffProfile::new(0.3, 2).unwrap();
        let out = apply_with_cutoff(&grad, &profile, &u).unwrap();
        for p in 0..out.npoints() {
            let x = out.coords(p);
            let expected = profile.derivative(&x, &[1]) * (2.0 * PI * x[0]).cos()
                - profile.value(&x) * 2.0 * PI * (2.0 * PI * x[0]).sin();
            assert!((out.point(p)[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sequence_gives_zero_potentials() {
        let div = DiffOp::builtin("div", 2).unwrap();
        let b = crate::exactness::potential(&div).unwrap();
        let w = vec![SpatialField::zeros(2, 32, 2)];
        let out = compactify_sequence(&div, &b, &w, &PipelineParams::default()).unwrap();
        assert!(out.fields[0].potential.values().iter().all(|&v| v == 0.0));
        assert!(out.fields[0].field.values().iter().all(|&v| v == 0.0));
        assert!(out.default_ladder);
    }

    #[test]
    fn rejects_non_exact_pair() {
        let div = DiffOp::builtin("div", 2).unwrap();
        let grad = DiffOp::builtin("grad_scalar", 2).unwrap();
        let w = vec![SpatialField::zeros(2, 16, 2)];
        assert_eq!(
            compactify_sequence(&div, &grad, &w, &PipelineParams::default()).unwrap_err(),
            AfreeError::NotExactPair
        );
    }
}
