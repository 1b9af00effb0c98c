//! Periodic fields on the unit torus `T^n = [0,1)^n` as truncated Fourier
//! series, and Fourier multipliers built from operator symbols.
//!
//! Grids have `M` points per axis at `x_i = i/M`, axis 0 varying slowest.
//! Coefficients follow `ŵ(ξ) = ∫ w(x) e^{−2πi x·ξ} dx`, i.e. the forward DFT
//! divided by `M^n`, and are stored in FFT order: index `k ≥ M/2` holds
//! frequency `k − M`. A `k`-th order operator acts as multiplication by
//! `(2πi)^k A(ξ)`.
//!
//! For even `M` the Nyquist frequency `−M/2` has no partner in the grid, so a
//! multiplier of odd order would break Hermitian symmetry there; such
//! multipliers output zero at any frequency with a Nyquist component.

mod afield;
mod multiplier;

use std::f64::consts::PI;

use num::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use thiserror::Error;

use crate::diffop::DiffOp;
use crate::exactness::{pseudoinverse_symbol, SymbolAnalysis};
use crate::polymat::{PolyMatrix, RatMatrix, Rational};
pub use afield::{read_afield, read_afield_binary, write_afield, write_afield_binary};
use multiplier::{Evaluated, IntSymbol, RationalMultiplier};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("fiber mismatch: expected {expected} components, got {got}")]
    FiberMismatch { expected: usize, got: usize },
    #[error("rank drops at lattice frequency {witness:?}")]
    NotConstantRank { witness: Vec<i64> },
    #[error("field has nonzero mean (|ŵ(0)| = {magnitude:e})")]
    NonZeroMean { magnitude: f64 },
    #[error("field is not A-free: relative residual {residual:e} exceeds {tol:e}")]
    NotAFree { residual: f64, tol: f64 },
    #[error("invalid band: {0}")]
    Band(String),
    #[error("field file line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Real samples on the uniform grid, `values[p·d + c]` for grid point `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    n: usize,
    m: usize,
    d: usize,
    values: Vec<f64>,
}

fn grid_points(n: usize, m: usize) -> usize {
    m.pow(n as u32)
}

fn unravel(mut idx: usize, n: usize, m: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = idx % m;
        idx /= m;
    }
    out
}

impl SpatialField {
    pub fn new(n: usize, m: usize, d: usize, values: Vec<f64>) -> Result<Self, SpectralError> {
        let expected = grid_points(n, m) * d;
        if values.len() != expected {
            return Err(SpectralError::ShapeMismatch(format!(
                "{} values for a {}^{} grid with {} components",
                values.len(),
                m,
                n,
                d
            )));
        }
        Ok(SpatialField { n, m, d, values })
    }

    pub fn zeros(n: usize, m: usize, d: usize) -> Self {
        SpatialField {
            n,
            m,
            d,
            values: vec![0.0; grid_points(n, m) * d],
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(n: usize, m: usize, d: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid_points(n, m) * d);
        for p in 0..grid_points(n, m) {
            let x: Vec<f64> = unravel(p, n, m).into_iter().map(|i| i as f64 / m as f64).collect();
            let v = f(&x);
            assert_eq!(v.len(), d, "sample has wrong fiber dimension");
            values.extend(v);
        }
        SpatialField { n, m, d, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn npoints(&self) -> usize {
        grid_points(self.n, self.m)
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.values[p * self.d..(p + 1) * self.d]
    }

    pub fn point_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.values[p * self.d..(p + 1) * self.d]
    }

    /// Integer grid coordinates of point `p`.
    pub fn grid_index(&self, p: usize) -> Vec<usize> {
        unravel(p, self.n, self.m)
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        self.grid_index(p).into_iter().map(|i| i as f64 / self.m as f64).collect()
    }

    /// Grid mean of each component.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        for p in 0..self.npoints() {
            for (a, v) in acc.iter_mut().zip(self.point(p)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / self.npoints() as f64).collect()
    }

    /// Discrete `L²(T^n)` norm: `(mean |w|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s / self.npoints() as f64).sqrt()
    }

    /// Largest Euclidean fiber norm over the grid.
    pub fn sup_norm(&self) -> f64 {
        (0..self.npoints())
            .map(|p| self.point(p).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &SpatialField) -> Result<SpatialField, SpectralError> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(SpatialField { values, ..*self })
    }

    fn check_same(&self, other: &SpatialField) -> Result<(), SpectralError> {
        if (self.n, self.m, self.d) != (other.n, other.m, other.d) {
            return Err(SpectralError::ShapeMismatch(format!(
                "n={} M={} d={} vs n={} M={} d={}",
                self.n, self.m, self.d, other.n, other.m, other.d
            )));
        }
        Ok(())
    }
}

/// Fourier coefficients `ŵ(ξ)` for all `ξ` of an `M^n` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    n: usize,
    m: usize,
    d: usize,
    coeffs: Vec<Complex64>,
    real: bool,
}

fn fft_axes(data: &mut [Complex64], n: usize, m: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(m, direction);
    let mut line = vec![Complex64::zero(); m];
    for axis in 0..n {
        let stride = m.pow((n - 1 - axis) as u32);
        let block = stride * m;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

impl TorusField {
    pub fn zeros(n: usize, m: usize, d: usize) -> Self {
        TorusField {
            n,
            m,
            d,
            coeffs: vec![Complex64::zero(); grid_points(n, m) * d],
            real: true,
        }
    }

    pub fn from_coeffs(n: usize, m: usize, d: usize, coeffs: Vec<Complex64>, real: bool) -> Result<Self, SpectralError> {
        if coeffs.len() != grid_points(n, m) * d {
            return Err(SpectralError::ShapeMismatch(format!(
                "{} coefficients for a {}^{} grid with {} components",
                coeffs.len(),
                m,
                n,
                d
            )));
        }
        Ok(TorusField { n, m, d, coeffs, real })
    }

    /// Forward transform of real samples.
    pub fn transform(w: &SpatialField) -> Self {
        let values: Vec<Complex64> = w.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut out = Self::transform_complex(w.n, w.m, w.d, &values).expect("consistent shape");
        out.real = true;
        out
    }

    pub fn transform_complex(n: usize, m: usize, d: usize, samples: &[Complex64]) -> Result<Self, SpectralError> {
        let npts = grid_points(n, m);
        if samples.len() != npts * d {
            return Err(SpectralError::ShapeMismatch(format!(
                "{} samples for a {}^{} grid with {} components",
                samples.len(),
                m,
                n,
                d
            )));
        }
        let mut coeffs = vec![Complex64::zero(); npts * d];
        let scale = 1.0 / npts as f64;
        let mut buf = vec![Complex64::zero(); npts];
        for c in 0..d {
            for (p, slot) in buf.iter_mut().enumerate() {
                *slot = samples[p * d + c];
            }
            fft_axes(&mut buf, n, m, FftDirection::Forward);
            for (p, v) in buf.iter().enumerate() {
                coeffs[p * d + c] = v * scale;
            }
        }
        Ok(TorusField {
            n,
            m,
            d,
            coeffs,
            real: false,
        })
    }

    pub fn inverse_complex(&self) -> Vec<Complex64> {
        let npts = grid_points(self.n, self.m);
        let mut out = vec![Complex64::zero(); npts * self.d];
        let mut buf = vec![Complex64::zero(); npts];
        for c in 0..self.d {
            for (p, slot) in buf.iter_mut().enumerate() {
                *slot = self.coeffs[p * self.d + c];
            }
            fft_axes(&mut buf, self.n, self.m, FftDirection::Inverse);
            for (p, v) in buf.iter().enumerate() {
                out[p * self.d + c] = *v;
            }
        }
        out
    }

    /// Real part of the synthesized samples.
    pub fn inverse(&self) -> SpatialField {
        SpatialField {
            n: self.n,
            m: self.m,
            d: self.d,
            values: self.inverse_complex().into_iter().map(|z| z.re).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn nfreqs(&self) -> usize {
        grid_points(self.n, self.m)
    }

    /// Frequency stored at slot `f`.
    pub fn frequency(&self, f: usize) -> Vec<i64> {
        unravel(f, self.n, self.m)
            .into_iter()
            .map(|k| if 2 * k >= self.m { k as i64 - self.m as i64 } else { k as i64 })
            .collect()
    }

    pub fn slot_of(&self, xi: &[i64]) -> Option<usize> {
        if xi.len() != self.n {
            return None;
        }
        let m = self.m as i64;
        let mut slot = 0usize;
        for &k in xi {
            let lo = -(m / 2);
            let hi = (m - 1) / 2;
            if k < lo || k > hi {
                return None;
            }
            slot = slot * self.m + k.rem_euclid(m) as usize;
        }
        Some(slot)
    }

    pub fn coeff(&self, xi: &[i64]) -> Option<&[Complex64]> {
        self.slot_of(xi).map(|f| &self.coeffs[f * self.d..(f + 1) * self.d])
    }

    pub fn coeff_mut(&mut self, xi: &[i64]) -> Option<&mut [Complex64]> {
        let d = self.d;
        self.slot_of(xi).map(move |f| &mut self.coeffs[f * d..(f + 1) * d])
    }

    fn is_nyquist(&self, xi: &[i64]) -> bool {
        self.m % 2 == 0 && xi.iter().any(|&k| k == -(self.m as i64) / 2)
    }

    /// `ŵ(0)`, the field mean.
    pub fn mean(&self) -> &[Complex64] {
        &self.coeffs[..self.d]
    }

    /// Coefficient-space `L²` norm, equal to the grid norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for f in 0..self.nfreqs() {
            let xi = self.frequency(f);
            let neg: Vec<i64> = xi.iter().map(|k| -k).collect();
            let Some(g) = self.slot_of(&neg) else { continue };
            for c in 0..self.d {
                let a = self.coeffs[f * self.d + c];
                let b = self.coeffs[g * self.d + c].conj();
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }

    pub fn sub(&self, other: &TorusField) -> Result<TorusField, SpectralError> {
        if (self.n, self.m, self.d) != (other.n, other.m, other.d) {
            return Err(SpectralError::ShapeMismatch("fields live on different grids".into()));
        }
        Ok(TorusField {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
            real: self.real && other.real,
            ..*self
        })
    }

    pub fn scale(&self, s: f64) -> TorusField {
        TorusField {
            coeffs: self.coeffs.iter().map(|z| z * s).collect(),
            ..self.clone()
        }
    }

    /// Applies `out(ξ) = factor · M(ξ) ŵ(ξ)` for every frequency.
    fn apply_matrix(
        &self,
        rows: usize,
        factor: Complex64,
        odd: bool,
        mut eval: impl FnMut(&[i64]) -> Result<Option<Vec<f64>>, SpectralError>,
    ) -> Result<TorusField, SpectralError> {
        let d = self.d;
        let mut out = vec![Complex64::zero(); self.nfreqs() * rows];
        for f in 0..self.nfreqs() {
            let xi = self.frequency(f);
            if odd && self.is_nyquist(&xi) {
                continue;
            }
            let input = &self.coeffs[f * d..(f + 1) * d];
            if input.iter().all(|z| z.is_zero()) {
                continue;
            }
            let Some(mat) = eval(&xi)? else {
                out[f * rows..(f + 1) * rows].copy_from_slice(input);
                continue;
            };
            for i in 0..rows {
                let mut acc = Complex64::zero();
                for (j, z) in input.iter().enumerate() {
                    acc += z * mat[i * d + j];
                }
                out[f * rows + i] = acc * factor;
            }
        }
        Ok(TorusField {
            n: self.n,
            m: self.m,
            d: rows,
            coeffs: out,
            real: self.real,
        })
    }
}

fn two_pi_i_pow(k: i64) -> Complex64 {
    Complex64::new(0.0, 2.0 * PI).powi(k as i32)
}

fn check_fiber(expected: usize, w: &TorusField) -> Result<(), SpectralError> {
    if w.d != expected {
        return Err(SpectralError::FiberMismatch { expected, got: w.d });
    }
    Ok(())
}

fn check_dimension(op: &DiffOp, w: &TorusField) -> Result<(), SpectralError> {
    if op.n() != w.n {
        return Err(SpectralError::ShapeMismatch(format!(
            "operator acts on R^{}, field lives on T^{}",
            op.n(),
            w.n
        )));
    }
    Ok(())
}

/// Symbol of a differential operator, ready for repeated application.
#[derive(Debug, Clone)]
pub struct CompiledOp {
    order: u32,
    dim_from: usize,
    dim_to: usize,
    n: usize,
    symbol: IntSymbol,
}

impl CompiledOp {
    pub fn new(op: &DiffOp) -> Self {
        CompiledOp {
            order: op.order(),
            dim_from: op.dim_from(),
            dim_to: op.dim_to(),
            n: op.n(),
            symbol: IntSymbol::compile(&op.symbol()),
        }
    }

    pub fn apply(&self, w: &TorusField) -> Result<TorusField, SpectralError> {
        check_fiber(self.dim_from, w)?;
        if self.n != w.n {
            return Err(SpectralError::ShapeMismatch(format!(
                "operator acts on R^{}, field lives on T^{}",
                self.n, w.n
            )));
        }
        let factor = two_pi_i_pow(self.order as i64);
        w.apply_matrix(self.dim_to, factor, self.order % 2 == 1, |xi| {
            Ok(Some(self.symbol.eval_f64(xi)))
        })
    }
}

/// `(2πi)^k A(ξ) ŵ(ξ)` at every frequency.
pub fn apply_diffop(op: &DiffOp, w: &TorusField) -> Result<TorusField, SpectralError> {
    check_dimension(op, w)?;
    CompiledOp::new(op).apply(w)
}

/// Orthogonal projection onto `ker A(ξ)` at every frequency.
#[derive(Debug, Clone)]
pub struct Projector {
    dim: usize,
    n: usize,
    multiplier: Option<RationalMultiplier>,
}

impl Projector {
    pub fn new(a: &DiffOp) -> Self {
        let an = SymbolAnalysis::new(&a.symbol());
        let multiplier = if an.rank == 0 {
            None
        } else {
            let (num, den) = pseudoinverse_symbol(&an.symbol);
            let na = num.checked_mul(&an.symbol).expect("conformable");
            Some(RationalMultiplier::new(&na, &den, true))
        };
        Projector {
            dim: a.dim_from(),
            n: a.n(),
            multiplier,
        }
    }

    /// `P(ξ)` in exact arithmetic; `None` if the rank drops at `ξ`.
    pub fn exact_at(&self, xi: &[i64]) -> Option<RatMatrix> {
        match &self.multiplier {
            None => Some(RatMatrix::identity(self.dim)),
            Some(m) => m.eval_exact(xi).map(|v| RatMatrix::new(self.dim, self.dim, v)),
        }
    }

    pub fn apply(&self, w: &TorusField) -> Result<TorusField, SpectralError> {
        check_fiber(self.dim, w)?;
        if self.n != w.n {
            return Err(SpectralError::ShapeMismatch("dimension mismatch".into()));
        }
        let Some(m) = &self.multiplier else {
            return Ok(w.clone());
        };
        w.apply_matrix(self.dim, Complex64::new(1.0, 0.0), false, |xi| {
            if xi.iter().all(|&k| k == 0) {
                return Ok(None);
            }
            match m.eval_f64(xi) {
                Evaluated::Values(v) => Ok(Some(v)),
                Evaluated::Singular => Err(SpectralError::NotConstantRank { witness: xi.to_vec() }),
            }
        })
    }
}

pub fn project_afree(a: &DiffOp, w: &TorusField) -> Result<TorusField, SpectralError> {
    check_dimension(a, w)?;
    Projector::new(a).apply(w)
}

/// Relative distance `‖w − P_A w‖ / ‖w‖` of `w` from the `A`-free fields.
pub fn afree_residual(a: &DiffOp, w: &TorusField) -> Result<f64, SpectralError> {
    let p = project_afree(a, w)?;
    let norm = w.l2_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(w.sub(&p)?.l2_norm() / norm)
}

/// Inverse of a potential on its range: `û = (2πi)^{−l} B†(ξ) ŵ(ξ)`.
#[derive(Debug, Clone)]
pub struct Recovery {
    order: u32,
    n: usize,
    dim_from: usize,
    dim_to: usize,
    multiplier: Option<RationalMultiplier>,
}

/// Options for [`recover_potential_with`].
#[derive(Debug, Clone, Default)]
pub struct RecoverOptions {
    pub subtract_mean: bool,
    /// Annihilator paired with the potential; enables the `A`-free check.
    pub annihilator: Option<DiffOp>,
    /// Relative tolerance of the `A`-free check; `1e−8` if unset.
    pub tol: Option<f64>,
}

pub const DEFAULT_AFREE_TOL: f64 = 1e-8;
pub const MEAN_TOL: f64 = 1e-10;

impl Recovery {
    pub fn new(b: &DiffOp) -> Self {
        let an = SymbolAnalysis::new(&b.symbol());
        let multiplier = if an.rank == 0 {
            None
        } else {
            let (num, den) = pseudoinverse_symbol(&an.symbol);
            Some(RationalMultiplier::new(&num, &den, false))
        };
        Recovery {
            order: b.order(),
            n: b.n(),
            dim_from: b.dim_from(),
            dim_to: b.dim_to(),
            multiplier,
        }
    }

    /// Ignores the zero mode; callers check it.
    pub fn apply(&self, w: &TorusField) -> Result<TorusField, SpectralError> {
        check_fiber(self.dim_to, w)?;
        if self.n != w.n {
            return Err(SpectralError::ShapeMismatch("dimension mismatch".into()));
        }
        let Some(m) = &self.multiplier else {
            return Ok(TorusField {
                d: self.dim_from,
                coeffs: vec![Complex64::zero(); w.nfreqs() * self.dim_from],
                ..w.clone()
            });
        };
        debug_assert_eq!((m.rows(), m.cols()), (self.dim_from, self.dim_to));
        let factor = two_pi_i_pow(-(self.order as i64));
        let mut out = w.apply_matrix(self.dim_from, factor, self.order % 2 == 1, |xi| {
            if xi.iter().all(|&k| k == 0) {
                return Ok(Some(vec![0.0; self.dim_from * self.dim_to]));
            }
            match m.eval_f64(xi) {
                Evaluated::Values(v) => Ok(Some(v)),
                Evaluated::Singular => Err(SpectralError::NotConstantRank { witness: xi.to_vec() }),
            }
        })?;
        for z in out.coeffs[..self.dim_from].iter_mut() {
            *z = Complex64::zero();
        }
        Ok(out)
    }
}

pub fn recover_potential(b: &DiffOp, w: &TorusField, subtract_mean: bool) -> Result<TorusField, SpectralError> {
    recover_potential_with(
        b,
        w,
        &RecoverOptions {
            subtract_mean,
            ..RecoverOptions::default()
        },
    )
}

pub fn recover_potential_with(b: &DiffOp, w: &TorusField, opts: &RecoverOptions) -> Result<TorusField, SpectralError> {
    check_dimension(b, w)?;
    check_fiber(b.dim_to(), w)?;
    let magnitude = w.mean().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if magnitude > MEAN_TOL && !opts.subtract_mean {
        return Err(SpectralError::NonZeroMean { magnitude });
    }
    if let Some(a) = &opts.annihilator {
        let tol = opts.tol.unwrap_or(DEFAULT_AFREE_TOL);
        let residual = afree_residual(a, w)?;
        if residual > tol {
            return Err(SpectralError::NotAFree { residual, tol });
        }
    }
    Recovery::new(b).apply(w)
}

/// `∂^β w` by spectral differentiation.
pub fn derivative(w: &TorusField, beta: &[u32]) -> TorusField {
    assert_eq!(beta.len(), w.n, "multi-index length");
    let order: u32 = beta.iter().sum();
    let factor = two_pi_i_pow(order as i64);
    let d = w.d;
    let mut out = w.clone();
    for f in 0..w.nfreqs() {
        let xi = w.frequency(f);
        let mono: f64 = xi.iter().zip(beta).map(|(&k, &b)| (k as f64).powi(b as i32)).product();
        let zero = order % 2 == 1 && w.is_nyquist(&xi);
        for z in out.coeffs[f * d..(f + 1) * d].iter_mut() {
            *z = if zero { Complex64::zero() } else { *z * factor * mono };
        }
    }
    out
}

/// `‖D^i w‖_{L²}` with `D^i` the full tensor of `i`-th partial derivatives.
pub fn derivative_norm(w: &TorusField, i: u32) -> f64 {
    let mut acc = 0.0;
    for f in 0..w.nfreqs() {
        let mass: f64 = w.coeffs[f * w.d..(f + 1) * w.d].iter().map(|z| z.norm_sqr()).sum();
        if mass == 0.0 {
            continue;
        }
        let xi2: f64 = w.frequency(f).iter().map(|&k| (k * k) as f64).sum();
        acc += mass * (4.0 * PI * PI * xi2).powi(i as i32);
    }
    acc.sqrt()
}

/// `(Σ_ξ |ŵ(ξ)|² (1 + 4π²|ξ|²)^s)^{1/2}`.
pub fn sobolev_norm(w: &TorusField, s: i32) -> f64 {
    let mut acc = 0.0;
    for f in 0..w.nfreqs() {
        let block = &w.coeffs[f * w.d..(f + 1) * w.d];
        let mass: f64 = block.iter().map(|z| z.norm_sqr()).sum();
        if mass == 0.0 {
            continue;
        }
        let xi2: f64 = w.frequency(f).iter().map(|&k| (k * k) as f64).sum();
        acc += mass * (1.0 + 4.0 * PI * PI * xi2).powi(s);
    }
    acc.sqrt()
}

/// Frequencies `ξ` with `|ξ|∞ ≤ max_abs`, optionally without `ξ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub max_abs: i64,
    pub include_zero: bool,
}

/// Real field with standard Gaussian coefficients on `band`, Hermitian by
/// construction.
pub fn random_field(n: usize, m: usize, d: usize, band: Band, seed: u64) -> Result<TorusField, SpectralError> {
    if band.max_abs < 0 || 2 * band.max_abs >= m as i64 {
        return Err(SpectralError::Band(format!(
            "|ξ|∞ ≤ {} does not fit below the Nyquist frequency of a {}-point grid",
            band.max_abs, m
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = TorusField::zeros(n, m, d);
    let k = band.max_abs;
    let width = (2 * k + 1) as usize;
    for code in 0..width.pow(n as u32) {
        let xi: Vec<i64> = unravel(code, n, width).into_iter().map(|i| i as i64 - k).collect();
        let neg: Vec<i64> = xi.iter().map(|v| -v).collect();
        // Draw once per ± pair, at the lexicographically larger member.
        if xi < neg {
            continue;
        }
        let zero = xi == neg;
        if zero && !band.include_zero {
            continue;
        }
        let draws: Vec<Complex64> = (0..d)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                if zero {
                    Complex64::new(re, 0.0)
                } else {
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                }
            })
            .collect();
        field.coeff_mut(&xi).expect("in band").copy_from_slice(&draws);
        if !zero {
            for (slot, z) in field.coeff_mut(&neg).expect("in band").iter_mut().zip(&draws) {
                *slot = z.conj();
            }
        }
    }
    Ok(field)
}

/// `P(ξ)` symbolically as `(Id·e − N A, e)`; used for exact projector checks.
pub fn projector_symbol(a: &DiffOp) -> (PolyMatrix, crate::polymat::Poly) {
    let sym = a.symbol();
    let (num, den) = pseudoinverse_symbol(&sym);
    let na = num.checked_mul(&sym).expect("conformable");
    let id = PolyMatrix::identity(a.dim_from(), a.n()).scale_poly(&den);
    (id.checked_sub(&na).expect("square"), den)
}

pub fn rational_frequency(xi: &[i64]) -> Vec<Rational> {
    xi.iter().map(|&k| Rational::from_integer(k.into())).collect()
}
