//! Quadrature statistics of field sequences.

use crate::diffop::DiffOp;
use crate::spectral::{apply_diffop, sobolev_norm, SpatialField, SpectralError, TorusField};

/// A scalar function of the fiber vector.
pub trait TestFunction {
    fn name(&self) -> String;
    fn eval(&self, w: &[f64]) -> f64;
}

/// `w_1^{e_1} ⋯ w_d^{e_d}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
}

impl TestFunction for Monomial {
    fn name(&self) -> String {
        let parts: Vec<String> = self
            .exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| if e == 1 { format!("w{}", i + 1) } else { format!("w{}^{}", i + 1, e) })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }

    fn eval(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.exponents).map(|(x, &e)| x.powi(e as i32)).product()
    }
}

/// First moments `w_i` followed by second moments `w_i w_j`, `i ≤ j`.
pub fn standard_moments(d: usize) -> Vec<Monomial> {
    let mut out: Vec<Monomial> = (0..d)
        .map(|i| Monomial {
            exponents: (0..d).map(|k| (k == i) as u32).collect(),
        })
        .collect();
    for i in 0..d {
        for j in i..d {
            let mut e = vec![0; d];
            e[i] += 1;
            e[j] += 1;
            out.push(Monomial { exponents: e });
        }
    }
    out
}

/// Part of the unit cube a statistic is averaged over.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Cube,
    /// Points at distance at least `margin` from the boundary.
    Inner(f64),
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Cube => true,
            Region::Inner(margin) => x.iter().all(|&v| v >= *margin && 1.0 - v >= *margin),
            Region::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&a, &b))| v >= a && v <= b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MomentOptions {
    pub region: Region,
    /// Levels of the uniform-integrability ladder.
    pub alphas: Vec<f64>,
    /// When set, `‖A w_j‖_{W^{−k,2}}` is reported.
    pub annihilator: Option<DiffOp>,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            region: Region::Cube,
            alphas: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            annihilator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementDiagnostics {
    /// `L²` norm over the region (mean-normalized).
    pub lp_norm: f64,
    pub sobolev_residual: Option<f64>,
    pub moments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDiagnostics {
    pub p: u32,
    pub names: Vec<String>,
    pub elements: Vec<ElementDiagnostics>,
    /// `(α, sup_j ∫_{|w_j|>α} |w_j|^p)`.
    pub tail_ladder: Vec<(f64, f64)>,
}

/// Midpoint-rule averages over the region of each test function, plus
/// norms and the tail-mass ladder.
pub fn ym_moments(
    fields: &[SpatialField],
    tests: &[&dyn TestFunction],
    opts: &MomentOptions,
) -> Result<SequenceDiagnostics, SpectralError> {
    let mut elements = Vec::with_capacity(fields.len());
    let mut tails = vec![0.0f64; opts.alphas.len()];
    for w in fields {
        let mut sums = vec![0.0; tests.len()];
        let mut norm2 = 0.0;
        let mut tail = vec![0.0; opts.alphas.len()];
        let mut count = 0usize;
        for p in 0..w.npoints() {
            if !opts.region.contains(&w.coords(p)) {
                continue;
            }
            count += 1;
            let v = w.point(p);
            for (s, t) in sums.iter_mut().zip(tests) {
                *s += t.eval(v);
            }
            let m2 = v.iter().map(|x| x * x).sum::<f64>();
            norm2 += m2;
            for (slot, &a) in tail.iter_mut().zip(&opts.alphas) {
                if m2.sqrt() > a {
                    *slot += m2;
                }
            }
        }
        let scale = if count == 0 { 0.0 } else { 1.0 / count as f64 };
        for (agg, t) in tails.iter_mut().zip(&tail) {
            *agg = agg.max(t * scale);
        }
        let sobolev_residual = match &opts.annihilator {
            Some(a) => {
                let aw = apply_diffop(a, &TorusField::transform(w))?;
                Some(sobolev_norm(&aw, -(a.order() as i32)))
            }
            None => None,
        };
        elements.push(ElementDiagnostics {
            lp_norm: (norm2 * scale).sqrt(),
            sobolev_residual,
            moments: sums.iter().map(|s| s * scale).collect(),
        });
    }
    Ok(SequenceDiagnostics {
        p: 2,
        names: tests.iter().map(|t| t.name()).collect(),
        elements,
        tail_ladder: opts.alphas.iter().copied().zip(tails).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillation(j: usize, m: usize) -> SpatialField {
        SpatialField::from_fn(2, m, 2, move |x| vec![0.0, (2.0 * PI * j as f64 * x[0]).sin()])
    }

    #[test]
    fn oscillation_moments() {
        let fields: Vec<SpatialField> = [1, 2, 4].iter().map(|&j| oscillation(j, 32)).collect();
        let tests = standard_moments(2);
        let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t as &dyn TestFunction).collect();
        let diag = ym_moments(&fields, &refs, &MomentOptions::default()).unwrap();
        assert_eq!(diag.names, vec!["w1", "w2", "w1^2", "w1*w2", "w2^2"]);
        for e in &diag.elements {
            assert!(e.moments[1].abs() < 1e-12);
            assert!((e.moments[4] - 0.5).abs() < 1e-6);
            assert!((e.lp_norm - 0.5f64.sqrt()).abs() < 1e-12);
        }
        let tails: Vec<f64> = diag.tail_ladder.iter().map(|t| t.1).collect();
        assert!(tails.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(*tails.last().unwrap(), 0.0);
    }

    #[test]
    fn constant_field_moments() {
        let c = SpatialField::from_fn(2, 8, 2, |_| vec![1.5, -2.0]);
        let tests = standard_moments(2);
        let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t as &dyn TestFunction).collect();
        let diag = ym_moments(&[c], &refs, &MomentOptions::default()).unwrap();
        let expected = [1.5, -2.0, 2.25, -3.0, 4.0];
        for (m, e) in diag.elements[0].moments.iter().zip(expected) {
            assert!((m - e).abs() < 1e-14);
        }
    }

    #[test]
    fn sobolev_residual_of_afree_field_vanishes() {
        let div = DiffOp::builtin("div", 2).unwrap();
        let opts = MomentOptions {
            annihilator: Some(div),
            ..MomentOptions::default()
        };
        let diag = ym_moments(&[oscillation(3, 16)], &[], &opts).unwrap();
        assert!(diag.elements[0].sobolev_residual.unwrap() < 1e-14);
    }

    #[test]
    fn regions() {
        assert!(Region::Inner(0.25).contains(&[0.25, 0.75]));
        assert!(!Region::Inner(0.25).contains(&[0.2, 0.5]));
        let b = Region::Box {
            lo: vec![0.0, 0.0],
            hi: vec![0.5, 0.5],
        };
        assert!(b.contains(&[0.5, 0.1]) && !b.contains(&[0.6, 0.1]));
    }
}
