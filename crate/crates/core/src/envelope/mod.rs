//! Upper bounds for the potential-form envelope
//! `Q f(η) = inf_u ⨍ f(η + Bu)` over compactly supported test potentials.

mod expr;
mod potential;

pub use expr::{parse_integrand, ExprError, Integrand};
pub use potential::{gen_test_potential, rescale_potential, BasisResponses, PotentialShape, TestPotential, OVERSAMPLING};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::afree::CutoffProfile;
use crate::diffop::{DiffOp, DiffOpError};
use crate::polymat::Rational;
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid of {grid} points per axis cannot resolve the modes; need at least {needed}")]
    Resolution { grid: usize, needed: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("box exceeds the unit cube: {0}")]
    BoxOutsideCube(String),
    #[error(transparent)]
    Integrand(#[from] ExprError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    DiffOp(#[from] DiffOpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeOptions {
    /// Sampling grid per axis.
    pub grid: usize,
    /// Max trigonometric mode `M`.
    pub modes: u32,
    /// Cutoff margin; the potential vanishes within `margin/2` of the boundary.
    pub margin: f64,
    /// Cutoff smoothness; defaults to operator order + 2.
    pub cutoff_order: Option<u32>,
    /// Amplitude ladder tried along each random direction.
    pub amplitudes: Vec<f64>,
    pub sweeps: usize,
    /// Initial coordinate step relative to the annealed amplitude.
    pub initial_step: f64,
    /// Relative improvement below which a move is treated as rounding noise.
    pub min_improvement: f64,
    /// Values below `−floor · (|f(η)| + 1)` mark divergence.
    pub floor: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions {
            grid: 32,
            modes: 2,
            margin: 0.25,
            cutoff_order: None,
            amplitudes: (-2..=6).map(|e| 10f64.powi(e)).collect(),
            sweeps: 2,
            initial_step: 0.25,
            min_improvement: 1e-12,
            floor: 1e9,
        }
    }
}

impl EnvelopeOptions {
    pub fn shape(&self, b: &DiffOp) -> Result<PotentialShape, EnvelopeError> {
        let order = self.cutoff_order.unwrap_or(b.order() + 2);
        let cutoff = CutoffProfile::new(self.margin, order)
            .map_err(|e| EnvelopeError::InvalidParameter(e.to_string()))?;
        Ok(PotentialShape {
            n: b.n(),
            dim: b.dim_from(),
            modes: self.modes,
            cutoff,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub evaluation: u64,
    pub restart: u64,
    pub value: f64,
    pub best: f64,
}

#[derive(Debug, Clone)]
pub struct EnvelopeEstimate {
    pub f_eta: f64,
    pub value: f64,
    pub diverged: bool,
    pub evaluations: u64,
    /// Restart that produced the best candidate; `None` for `u = 0`.
    pub best_restart: Option<u64>,
    pub best: TestPotential,
    pub trace: Vec<TracePoint>,
}

impl EnvelopeEstimate {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("evaluation,restart,value,best\n");
        for t in &self.trace {
            out.push_str(&format!("{},{},{:.17e},{:.17e}\n", t.evaluation, t.restart, t.value, t.best));
        }
        out
    }
}

pub fn estimate_envelope(
    f: &Integrand,
    eta: &[f64],
    b: &DiffOp,
    budget: u64,
    seed: u64,
) -> Result<EnvelopeEstimate, EnvelopeError> {
    estimate_envelope_with(f, eta, b, budget, seed, &EnvelopeOptions::default())
}

struct Search<'a> {
    f: &'a Integrand,
    eta: &'a [f64],
    responses: BasisResponses,
    budget: u64,
    floor: f64,
    evaluations: u64,
    best_value: f64,
    best_coeffs: Vec<f64>,
    best_restart: Option<u64>,
    diverged: bool,
    trace: Vec<TracePoint>,
}

impl Search<'_> {
    /// `None` once the budget is spent or divergence was seen.
    fn eval(&mut self, c: &[f64], restart: u64) -> Option<f64> {
        if self.diverged || self.evaluations >= self.budget {
            return None;
        }
        let field = self.responses.combine(c);
        let d = self.responses.d();
        let mut w = vec![0.0; d];
        let mut sum = 0.0;
        for chunk in field.chunks(d) {
            for ((slot, e), v) in w.iter_mut().zip(self.eta).zip(chunk) {
                *slot = e + v;
            }
            sum += self.f.eval(&w);
        }
        let value = sum / (field.len() / d) as f64;
        self.evaluations += 1;
        if value < self.best_value {
            self.best_value = value;
            self.best_coeffs = c.to_vec();
            self.best_restart = Some(restart);
        }
        self.trace.push(TracePoint {
            evaluation: self.evaluations,
            restart,
            value,
            best: self.best_value,
        });
        if value < self.floor {
            self.diverged = true;
        }
        Some(value)
    }
}

/// Multistart search: each restart draws a direction from its own seeded
/// stream, climbs the amplitude ladder while values keep dropping, then runs
/// central-difference coordinate descent. Evaluation order does not depend on
/// the budget, so a larger budget extends the same sequence.
pub fn estimate_envelope_with(
    f: &Integrand,
    eta: &[f64],
    b: &DiffOp,
    budget: u64,
    seed: u64,
    opts: &EnvelopeOptions,
) -> Result<EnvelopeEstimate, EnvelopeError> {
    if eta.len() != b.dim_to() {
        return Err(EnvelopeError::DimensionMismatch(format!(
            "η has {} components, operator targets R^{}",
            eta.len(),
            b.dim_to()
        )));
    }
    f.check_dim(b.dim_to())?;
    if opts.amplitudes.is_empty() || opts.amplitudes.iter().any(|a| !(*a > 0.0)) {
        return Err(EnvelopeError::InvalidParameter("amplitude ladder must be positive and nonempty".into()));
    }
    let shape = opts.shape(b)?;
    let responses = BasisResponses::new(&shape, b, opts.grid)?;
    let f_eta = f.eval(eta);
    let len = shape.basis_len();
    let mut s = Search {
        f,
        eta,
        responses,
        budget,
        floor: -opts.floor * (f_eta.abs() + 1.0),
        evaluations: 0,
        best_value: f_eta,
        best_coeffs: vec![0.0; len],
        best_restart: None,
        diverged: false,
        trace: Vec::new(),
    };
    let significant = |new: f64, old: f64| new < old - opts.min_improvement * old.abs().max(1.0);

    'restarts: for restart in 0u64.. {
        if s.diverged || s.evaluations >= s.budget {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let mut dir: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rms = (dir.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
        dir.iter_mut().for_each(|v| *v /= rms);

        let mut local: Option<(f64, f64)> = None;
        for &a in &opts.amplitudes {
            let c: Vec<f64> = dir.iter().map(|v| v * a).collect();
            let Some(v) = s.eval(&c, restart) else { break 'restarts };
            match local {
                Some((lv, _)) if !significant(v, lv) => break,
                _ => local = Some((v, a)),
            }
        }
        let (mut fc, a) = local.expect("ladder is nonempty");
        let mut c: Vec<f64> = dir.iter().map(|v| v * a).collect();
        let mut step = vec![opts.initial_step * a; len];

        for _ in 0..opts.sweeps {
            for i in 0..len {
                let h = step[i];
                let base = c[i];
                c[i] = base + h;
                let Some(fp) = s.eval(&c, restart) else { break 'restarts };
                c[i] = base - h;
                let Some(fm) = s.eval(&c, restart) else { break 'restarts };
                let mut pick = (fc, 0.0);
                for cand in [(fp, h), (fm, -h)] {
                    if cand.0 < pick.0 {
                        pick = cand;
                    }
                }
                let curv = (fp - 2.0 * fc + fm) / (h * h);
                if curv > 0.0 {
                    let t = (-(fp - fm) / (2.0 * h) / curv).clamp(-4.0 * h, 4.0 * h);
                    if t.abs() > 1e-3 * h && (t.abs() - h).abs() > 1e-3 * h {
                        c[i] = base + t;
                        let Some(fn_) = s.eval(&c, restart) else { break 'restarts };
                        if fn_ < pick.0 {
                            pick = (fn_, t);
                        }
                    }
                }
                if pick.1 != 0.0 && significant(pick.0, fc) {
                    c[i] = base + pick.1;
                    fc = pick.0;
                    step[i] *= 2.0;
                } else {
                    c[i] = base;
                    step[i] *= 0.5;
                }
            }
        }
    }

    let best = TestPotential::from_coeffs(&shape, s.best_coeffs.clone(), 1.0, seed);
    Ok(EnvelopeEstimate {
        f_eta,
        value: s.best_value,
        diverged: s.diverged,
        evaluations: s.evaluations,
        best_restart: s.best_restart,
        best,
        trace: s.trace,
    })
}

/// Axis-aligned box `Π [lo_i, hi_i] ⊂ [0,1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, EnvelopeError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(EnvelopeError::DimensionMismatch("box corners differ in length".into()));
        }
        for (i, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a < b) {
                return Err(EnvelopeError::InvalidParameter(format!("empty box along axis {}", i + 1)));
            }
            if a < 0.0 || b > 1.0 {
                return Err(EnvelopeError::BoxOutsideCube(format!("axis {} spans [{a}, {b}]", i + 1)));
            }
        }
        Ok(DomainBox { lo, hi })
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    fn lengths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }
}

/// `B` acting on `w` where `v(y) = w((y − lo)/L)`: coefficients times `Π L_i^{−α_i}`.
pub fn box_operator(b: &DiffOp, domain: &DomainBox) -> Result<DiffOp, EnvelopeError> {
    let lengths = domain
        .lengths()
        .iter()
        .map(|&l| Rational::from_float(l).ok_or_else(|| EnvelopeError::InvalidParameter(format!("box length {l}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let terms = b.coeffs().map(|(alpha, m)| {
        let mut factor = Rational::from_integer(1.into());
        for (l, &e) in lengths.iter().zip(alpha.exponents()) {
            for _ in 0..e {
                factor /= l;
            }
        }
        (alpha.clone(), m.scale(&factor))
    });
    Ok(DiffOp::new(b.n(), b.order(), b.dim_from(), b.dim_to(), terms.collect::<Vec<_>>())?)
}

#[derive(Debug, Clone)]
pub struct DomainReport {
    pub f_eta: f64,
    pub box_estimate: EnvelopeEstimate,
    pub cube_estimate: EnvelopeEstimate,
    pub epsilon: f64,
    pub shift: Vec<f64>,
    /// `(1 − εⁿ|Ω|) f(η) + εⁿ|Ω| · box value`: the cube average of the
    /// embedded box candidate.
    pub transferred: f64,
    /// Violation seen on the box is also seen after embedding.
    pub consistent: bool,
    pub identity: Option<IdentityCheck>,
}

/// Both sides of the embedding identity by midpoint quadrature with
/// closed-form derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub grid: usize,
    /// Seed of the fixed potential when the box search returned `u = 0`.
    pub fallback_seed: Option<u64>,
    pub cube_average: f64,
    pub rearranged: f64,
}

impl IdentityCheck {
    pub fn error(&self) -> f64 {
        (self.cube_average - self.rearranged).abs()
    }
}

pub const EMBEDDING_SCALE: f64 = 0.5;

pub fn check_domain_invariance(
    f: &Integrand,
    eta: &[f64],
    b: &DiffOp,
    domain: &DomainBox,
    budget: u64,
    seed: u64,
) -> Result<DomainReport, EnvelopeError> {
    check_domain_invariance_with(f, eta, b, domain, budget, seed, &EnvelopeOptions::default())
}

pub fn check_domain_invariance_with(
    f: &Integrand,
    eta: &[f64],
    b: &DiffOp,
    domain: &DomainBox,
    budget: u64,
    seed: u64,
    opts: &EnvelopeOptions,
) -> Result<DomainReport, EnvelopeError> {
    if domain.lo.len() != b.n() {
        return Err(EnvelopeError::DimensionMismatch(format!(
            "box in R^{}, operator on R^{}",
            domain.lo.len(),
            b.n()
        )));
    }
    let b_box = box_operator(b, domain)?;
    let box_estimate = estimate_envelope_with(f, eta, &b_box, budget, seed, opts)?;
    let cube_estimate = estimate_envelope_with(f, eta, b, budget, seed, opts)?;
    let f_eta = box_estimate.f_eta;
    let eps = EMBEDDING_SCALE;
    let weight = eps.powi(b.n() as i32) * domain.volume();
    let transferred = (1.0 - weight) * f_eta + weight * box_estimate.value;
    let tol = 1e-12 * (f_eta.abs() + 1.0);
    let consistent = box_estimate.value >= f_eta - tol || transferred < f_eta - tol * weight;
    let shift = vec![0.0; b.n()];

    let (v, fallback_seed) = if box_estimate.best.is_zero() {
        (gen_test_potential(box_estimate.best.shape(), 1.0, seed), Some(seed))
    } else {
        (box_estimate.best.clone(), None)
    };
    let identity = aligned_grid(domain, eps).map(|grid| {
        let (cube_average, rearranged) = identity_sides(f, eta, b, domain, &v, eps, grid);
        IdentityCheck {
            grid,
            fallback_seed,
            cube_average,
            rearranged,
        }
    });
    Ok(DomainReport {
        f_eta,
        box_estimate,
        cube_estimate,
        epsilon: eps,
        shift,
        transferred,
        consistent,
        identity,
    })
}

/// Smallest power-of-two grid (64 to 4096) on which the image box is a union
/// of cells.
fn aligned_grid(domain: &DomainBox, eps: f64) -> Option<usize> {
    let on_grid = |x: f64, m: usize| {
        let t = x * eps * m as f64;
        (t - t.round()).abs() < 1e-9
    };
    (6..=12).map(|k| 1usize << k).find(|&m| {
        domain.lo.iter().chain(&domain.hi).all(|&x| on_grid(x, m))
    })
}

/// `Bv(y)` for `v(y) = w((y − lo)/L)`, zero off the box.
fn box_field(b: &DiffOp, domain: &DomainBox, w: &TestPotential, y: &[f64]) -> Vec<f64> {
    let lengths = domain.lengths();
    let s: Vec<f64> = y.iter().zip(&domain.lo).zip(&lengths).map(|((y, lo), l)| (y - lo) / l).collect();
    let mut out = vec![0.0; b.dim_to()];
    if s.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return out;
    }
    for (alpha, mat) in b.coeffs() {
        let m = mat.to_f64();
        let factor: f64 = lengths.iter().zip(alpha.exponents()).map(|(l, &e)| l.powi(-(e as i32))).product();
        let dw = w.derivative_at(&s, alpha.exponents());
        for (i, slot) in out.iter_mut().enumerate() {
            for (j, v) in dw.iter().enumerate() {
                *slot += factor * m[i * b.dim_from() + j] * v;
            }
        }
    }
    out
}

fn cells(n: usize, per_axis: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = per_axis.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; n];
        for a in (0..n).rev() {
            idx[a] = flat % per_axis[a];
            flat /= per_axis[a];
        }
        idx
    })
}

fn identity_sides(
    f: &Integrand,
    eta: &[f64],
    b: &DiffOp,
    domain: &DomainBox,
    v: &TestPotential,
    eps: f64,
    grid: usize,
) -> (f64, f64) {
    let n = b.n();
    let l = b.order() as i32;
    let f_at = |field: &[f64]| {
        let w: Vec<f64> = eta.iter().zip(field).map(|(e, v)| e + v).collect();
        f.eval(&w)
    };
    // u(x) = ε^l v(x/ε): ∂^α u(x) = ε^{l−|α|} (∂^α v)(x/ε).
    let bu = |x: &[f64]| {
        let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
        let mut out = vec![0.0; b.dim_to()];
        for (alpha, mat) in b.coeffs() {
            let single = DiffOp::new(n, b.order(), b.dim_from(), b.dim_to(), [(alpha.clone(), mat.clone())])
                .expect("term of a valid operator");
            let scale = eps.powi(l - alpha.degree() as i32);
            for (slot, t) in out.iter_mut().zip(box_field(&single, domain, v, &y)) {
                *slot += scale * t;
            }
        }
        out
    };
    let h = 1.0 / grid as f64;
    let mut lhs = 0.0;
    for idx in cells(n, &vec![grid; n]) {
        let x: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) * h).collect();
        lhs += f_at(&bu(&x));
    }
    lhs /= grid.pow(n as u32) as f64;

    let per_axis: Vec<usize> = domain
        .lo
        .iter()
        .zip(&domain.hi)
        .map(|(a, b)| ((b - a) * eps * grid as f64).round() as usize)
        .collect();
    let hy = 1.0 / (eps * grid as f64);
    let mut inner = 0.0;
    for idx in cells(n, &per_axis) {
        let y: Vec<f64> = idx.iter().zip(&domain.lo).map(|(&k, lo)| lo + (k as f64 + 0.5) * hy).collect();
        inner += f_at(&box_field(b, domain, v, &y)) * hy.powi(n as i32);
    }
    let weight = eps.powi(n as i32) * domain.volume();
    (lhs, (1.0 - weight) * f.eval(eta) + eps.powi(n as i32) * inner)
}
