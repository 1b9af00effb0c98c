//! Compactly supported test potentials `u = a · ρ · Σ_b c_b φ_b` on the unit
//! cube, with `φ_b` real trigonometric modes of max frequency `M`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::EnvelopeError;
use crate::afree::CutoffProfile;
use crate::diffop::DiffOp;
use crate::spectral::{apply_diffop, SpatialField, TorusField};

/// Grid points per axis needed per unit of max mode (4× oversampling of `2M`).
pub const OVERSAMPLING: usize = 8;

/// Dimensions and cutoff of a family of test potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialShape {
    pub n: usize,
    pub dim: usize,
    pub modes: u32,
    pub cutoff: CutoffProfile,
}

impl PotentialShape {
    pub fn basis_len(&self) -> usize {
        self.dim * self.modes_per_component()
    }

    fn modes_per_component(&self) -> usize {
        (2 * self.modes as usize + 1).pow(self.n as u32)
    }

    /// `(component, frequency, is_sine)` of basis function `b`.
    fn basis(&self, b: usize) -> (usize, Vec<i64>, bool) {
        let per = self.modes_per_component();
        let (c, mut code) = (b / per, b % per);
        let width = 2 * self.modes as usize + 1;
        let mut k = vec![0i64; self.n];
        for slot in k.iter_mut().rev() {
            *slot = (code % width) as i64 - self.modes as i64;
            code /= width;
        }
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        if k < neg {
            (c, neg, true)
        } else {
            (c, k, false)
        }
    }

    pub fn check_grid(&self, grid: usize) -> Result<(), EnvelopeError> {
        let needed = OVERSAMPLING * (self.modes.max(1) as usize);
        if grid < needed {
            return Err(EnvelopeError::Resolution { grid, needed });
        }
        Ok(())
    }
}

/// `∂^γ φ(y)` for `φ = cos(2πk·y)` or `sin(2πk·y)`.
fn trig_derivative(k: &[i64], sine: bool, y: &[f64], gamma: &[u32]) -> f64 {
    let order: u32 = gamma.iter().sum();
    let mut factor = 1.0;
    for (&kk, &g) in k.iter().zip(gamma) {
        if g > 0 {
            factor *= (2.0 * PI * kk as f64).powi(g as i32);
        }
    }
    if factor == 0.0 {
        return 0.0;
    }
    let theta: f64 = 2.0 * PI * k.iter().zip(y).map(|(&kk, &yy)| kk as f64 * yy).sum::<f64>();
    // d/dθ cycles cos → −sin → −cos → sin.
    let (c, s) = (theta.cos(), theta.sin());
    let v = match (sine, order % 4) {
        (false, 0) => c,
        (false, 1) => -s,
        (false, 2) => -c,
        (false, _) => s,
        (true, 0) => s,
        (true, 1) => c,
        (true, 2) => -s,
        (true, _) => -c,
    };
    factor * v
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestPotential {
    shape: PotentialShape,
    coeffs: Vec<f64>,
    amplitude: f64,
    seed: u64,
    tiles: u32,
    scale: f64,
}

/// Seeded Gaussian coefficients on the trigonometric basis.
pub fn gen_test_potential(shape: &PotentialShape, amplitude: f64, seed: u64) -> TestPotential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..shape.basis_len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    TestPotential {
        shape: shape.clone(),
        coeffs,
        amplitude,
        seed,
        tiles: 1,
        scale: 1.0,
    }
}

/// `u_N(x) = N^{−l} u(Nx)`, with `u` extended periodically.
pub fn rescale_potential(u: &TestPotential, tiles: u32, order: u32) -> Result<TestPotential, EnvelopeError> {
    if tiles == 0 {
        return Err(EnvelopeError::InvalidParameter("rescaling factor must be at least 1".into()));
    }
    Ok(TestPotential {
        tiles: u.tiles * tiles,
        scale: u.scale * (tiles as f64).powi(-(order as i32)),
        ..u.clone()
    })
}

impl TestPotential {
    pub fn from_coeffs(shape: &PotentialShape, coeffs: Vec<f64>, amplitude: f64, seed: u64) -> Self {
        assert_eq!(coeffs.len(), shape.basis_len(), "coefficient count");
        TestPotential {
            shape: shape.clone(),
            coeffs,
            amplitude,
            seed,
            tiles: 1,
            scale: 1.0,
        }
    }

    pub fn shape(&self) -> &PotentialShape {
        &self.shape
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tiles(&self) -> u32 {
        self.tiles
    }

    /// Overall factor `N^{−l}` accumulated by rescaling.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Samples on a grid of `grid · tiles` points per axis. The tiles reuse the
    /// base samples, so rescaling is exact index bookkeeping.
    pub fn realize(&self, grid: usize) -> Result<SpatialField, EnvelopeError> {
        self.shape.check_grid(grid)?;
        let base = self.realize_base(grid);
        let (n, d) = (self.shape.n, self.shape.dim);
        let big = grid * self.tiles as usize;
        let mut out = SpatialField::zeros(n, big, d);
        for p in 0..out.npoints() {
            let idx = out.grid_index(p);
            let q = idx.iter().fold(0usize, |q, &i| q * grid + i % grid);
            let src = base.point(q).to_vec();
            for (slot, v) in out.point_mut(p).iter_mut().zip(src) {
                *slot = v * self.scale;
            }
        }
        Ok(out)
    }

    fn realize_base(&self, grid: usize) -> SpatialField {
        let zero = vec![0u32; self.shape.n];
        let (n, d) = (self.shape.n, self.shape.dim);
        let mut out = SpatialField::zeros(n, grid, d);
        for p in 0..out.npoints() {
            let y = out.coords(p);
            let rho = self.shape.cutoff.value(&y);
            if rho == 0.0 {
                continue;
            }
            let t = self.trig(&y, &zero);
            for (slot, v) in out.point_mut(p).iter_mut().zip(t) {
                *slot = self.amplitude * rho * v;
            }
        }
        out
    }

    /// `∂^γ` of the trigonometric factor at tile coordinates `y`.
    fn trig(&self, y: &[f64], gamma: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.dim];
        for (b, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let (comp, k, sine) = self.shape.basis(b);
            out[comp] += c * trig_derivative(&k, sine, y, gamma);
        }
        out
    }

    /// `Bu` on the realized grid by spectral differentiation.
    pub fn apply(&self, b: &DiffOp, grid: usize) -> Result<SpatialField, EnvelopeError> {
        let u = self.realize(grid)?;
        Ok(apply_diffop(b, &TorusField::transform(&u))?.inverse())
    }

    /// `∂^α u(x)` in closed form.
    pub fn derivative_at(&self, x: &[f64], alpha: &[u32]) -> Vec<f64> {
        let tiles = self.tiles as f64;
        let y: Vec<f64> = x.iter().map(|&v| (v * tiles).rem_euclid(1.0)).collect();
        let order: u32 = alpha.iter().sum();
        let pre = self.scale * self.amplitude * tiles.powi(order as i32);
        let mut out = vec![0.0; self.shape.dim];
        for beta in sub_indices(alpha) {
            let r = self.shape.cutoff.derivative(&y, &beta);
            if r == 0.0 {
                continue;
            }
            let gamma: Vec<u32> = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
            let w: f64 = alpha.iter().zip(&beta).map(|(&a, &b)| binomial(a, b)).product();
            for (slot, t) in out.iter_mut().zip(self.trig(&y, &gamma)) {
                *slot += pre * w * r * t;
            }
        }
        out
    }

    /// `Bu(x)` in closed form.
    pub fn apply_at(&self, b: &DiffOp, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; b.dim_to()];
        for (alpha, mat) in b.coeffs() {
            let m = mat.to_f64();
            let du = self.derivative_at(x, alpha.exponents());
            for (i, slot) in out.iter_mut().enumerate() {
                for (j, v) in du.iter().enumerate() {
                    *slot += m[i * b.dim_from() + j] * v;
                }
            }
        }
        out
    }
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

/// Responses `B(ρ φ_b)` of every basis function on a grid; a candidate's
/// field is the coefficient-weighted sum.
#[derive(Debug, Clone)]
pub struct BasisResponses {
    len: usize,
    d: usize,
    data: Vec<Vec<f64>>,
}

impl BasisResponses {
    pub fn new(shape: &PotentialShape, b: &DiffOp, grid: usize) -> Result<Self, EnvelopeError> {
        shape.check_grid(grid)?;
        if b.dim_from() != shape.dim || b.n() != shape.n {
            return Err(EnvelopeError::DimensionMismatch(format!(
                "operator maps R^{} on R^{}, potentials are R^{}-valued on R^{}",
                b.dim_from(),
                b.n(),
                shape.dim,
                shape.n
            )));
        }
        let mut data = Vec::with_capacity(shape.basis_len());
        for idx in 0..shape.basis_len() {
            let mut coeffs = vec![0.0; shape.basis_len()];
            coeffs[idx] = 1.0;
            let u = TestPotential::from_coeffs(shape, coeffs, 1.0, 0);
            data.push(u.apply(b, grid)?.values().to_vec());
        }
        Ok(BasisResponses {
            len: data.first().map(|v| v.len()).unwrap_or(0),
            d: b.dim_to(),
            data,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `Σ_b c_b R_b`, flattened point-major.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (c, r) in coeffs.iter().zip(&self.data) {
            if *c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(r) {
                *o += c * v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: usize, dim: usize, modes: u32) -> PotentialShape {
        PotentialShape {
            n,
            dim,
            modes,
            cutoff: CutoffProfile::new(0.25, 3).unwrap(),
        }
    }

    #[test]
    fn basis_is_a_bijection_onto_real_modes() {
        let s = shape(2, 1, 1);
        let mut seen = std::collections::BTreeSet::new();
        for b in 0..s.basis_len() {
            assert!(seen.insert(s.basis(b)));
        }
        assert_eq!(seen.len(), 9);
        assert!(seen.contains(&(0, vec![0, 0], false)));
        assert!(!seen.contains(&(0, vec![0, 0], true)));
    }

    #[test]
    fn zero_amplitude_and_determinism() {
        let s = shape(2, 2, 2);
        let z = gen_test_potential(&s, 0.0, 5);
        assert!(z.realize(16).unwrap().values().iter().all(|&v| v == 0.0));
        assert_eq!(gen_test_potential(&s, 1.0, 5), gen_test_potential(&s, 1.0, 5));
        assert_ne!(gen_test_potential(&s, 1.0, 5), gen_test_potential(&s, 1.0, 6));
    }

    #[test]
    fn band_samples_vanish() {
        let s = shape(2, 2, 2);
        let u = gen_test_potential(&s, 3.0, 1).realize(32).unwrap();
        for p in 0..u.npoints() {
            let x = u.coords(p);
            let dist = x.iter().map(|&v| v.min(1.0 - v)).fold(1.0, f64::min);
            if dist <= 0.125 {
                assert!(u.point(p).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn resolution_is_enforced() {
        let s = shape(2, 1, 4);
        assert!(matches!(
            gen_test_potential(&s, 1.0, 0).realize(16),
            Err(EnvelopeError::Resolution { grid: 16, needed: 32 })
        ));
    }

    #[test]
    fn closed_form_derivative_matches_finite_difference() {
        let s = shape(2, 1, 2);
        let u = gen_test_potential(&s, 1.0, 3);
        let h = 1e-6;
        for x in [[0.3, 0.6], [0.2, 0.8], [0.5, 0.14]] {
            let f = |dx: f64| u.derivative_at(&[x[0] + dx, x[1]], &[0, 0])[0];
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((u.derivative_at(&x, &[1, 0])[0] - fd).abs() < 1e-5);
        }
    }

    #[test]
    fn rescale_identity_and_tiling() {
        let s = shape(2, 1, 1);
        let u = gen_test_potential(&s, 1.0, 2);
        assert_eq!(rescale_potential(&u, 1, 1).unwrap(), u);
        let u4 = rescale_potential(&u, 4, 1).unwrap();
        let a = u.realize(8).unwrap();
        let b = u4.realize(8).unwrap();
        assert_eq!(b.m(), 32);
        assert!((b.sup_norm() / a.sup_norm() - 0.25).abs() < 1e-15);
        assert!(rescale_potential(&u, 0, 1).is_err());
    }

    #[test]
    fn responses_are_linear() {
        let s = shape(2, 1, 1);
        let grad = DiffOp::builtin("grad_scalar", 2).unwrap();
        let r = BasisResponses::new(&s, &grad, 16).unwrap();
        let u = gen_test_potential(&s, 1.0, 9);
        let direct = u.apply(&grad, 16).unwrap();
        let combined = r.combine(u.coeffs());
        for (a, b) in direct.values().iter().zip(&combined) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
