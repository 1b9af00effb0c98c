//! Tensor-product smoothstep cutoffs on the unit cube.

use super::AfreeError;

/// Polynomial smoothstep `S_q` on `[0, 1]`: `S(0) = 0`, `S(1) = 1`, and the
/// first `q` derivatives vanish at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothstep {
    order: u32,
    /// Coefficients of `S^{(j)}` in ascending powers, for `j = 0..=order`.
    derivs: Vec<Vec<f64>>,
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
}

impl Smoothstep {
    pub fn new(order: u32) -> Self {
        let q = order as u64;
        let mut c = vec![0.0; (2 * q + 2) as usize];
        for k in 0..=q {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            c[(q + 1 + k) as usize] = sign * binom(q + k, k) * binom(2 * q + 1, q - k);
        }
        let mut derivs = vec![c];
        for _ in 0..order {
            let last = derivs.last().expect("nonempty");
            let next: Vec<f64> = last.iter().enumerate().skip(1).map(|(i, a)| a * i as f64).collect();
            derivs.push(next);
        }
        Smoothstep { order, derivs }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `S^{(j)}(s)` with `S` extended by 0 below and 1 above `[0, 1]`.
    pub fn eval(&self, s: f64, j: u32) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return if j == 0 { 1.0 } else { 0.0 };
        }
        match self.derivs.get(j as usize) {
            Some(c) => horner(c, s),
            None => panic!("derivative of order {j} exceeds smoothness {}", self.order),
        }
    }

    /// `max_{[0,1]} |S^{(j)}|`, from the critical points of `S^{(j)}`.
    pub fn max_abs(&self, j: u32) -> f64 {
        let c = &self.derivs[j as usize];
        let dc: Vec<f64> = c.iter().enumerate().skip(1).map(|(i, a)| a * i as f64).collect();
        let mut best = horner(c, 0.0).abs().max(horner(c, 1.0).abs());
        const STEPS: usize = 4096;
        let mut prev = horner(&dc, 0.0);
        for i in 1..=STEPS {
            let s = i as f64 / STEPS as f64;
            let cur = horner(&dc, s);
            best = best.max(horner(c, s).abs());
            if prev.signum() != cur.signum() {
                let (mut lo, mut hi) = ((i - 1) as f64 / STEPS as f64, s);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if horner(&dc, mid).signum() == horner(&dc, lo).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                best = best.max(horner(c, 0.5 * (lo + hi)).abs());
            }
            prev = cur;
        }
        best
    }
}

/// `ρ(x) = Π_i g(x_i)` where `g` rises from 0 at distance `δ/2` from the
/// boundary to 1 at distance `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffProfile {
    margin: f64,
    step: Smoothstep,
    constant: f64,
}

impl CutoffProfile {
    pub fn new(margin: f64, order: u32) -> Result<Self, AfreeError> {
        if !(margin > 0.0 && margin < 0.5) {
            return Err(AfreeError::InvalidParameter(format!("cutoff margin {margin} outside (0, 1/2)")));
        }
        let step = Smoothstep::new(order);
        let constant = derivative_constant(&step);
        Ok(CutoffProfile { margin, step, constant })
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn order(&self) -> u32 {
        self.step.order()
    }

    /// `C` with `|∇^j ρ| ≤ C δ^{−j}` for `j ≤ order`, uniformly in `δ`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    fn axis(&self, x: f64, j: u32) -> f64 {
        let left = x <= 1.0 - x;
        let t = if left { x } else { 1.0 - x };
        let half = 0.5 * self.margin;
        let s = (t - half) / half;
        let v = self.step.eval(s, j);
        if v == 0.0 || j == 0 {
            return v;
        }
        let scale = (1.0 / half).powi(j as i32);
        if left || j % 2 == 0 {
            v * scale
        } else {
            -v * scale
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.axis(xi, 0)).product()
    }

    /// `∂^β ρ(x)`.
    pub fn derivative(&self, x: &[f64], beta: &[u32]) -> f64 {
        let mut acc = 1.0;
        for (&xi, &b) in x.iter().zip(beta) {
            acc *= self.axis(xi, b);
            if acc == 0.0 {
                return 0.0;
            }
        }
        acc
    }
}

/// Bound on `δ^j sup|∇^j ρ|` for `j ≤ q` and dimensions up to 3.
fn derivative_constant(step: &Smoothstep) -> f64 {
    let q = step.order();
    let m: Vec<f64> = (0..=q).map(|k| if k == 0 { 1.0 } else { step.max_abs(k) }).collect();
    let mut best: f64 = 1.0;
    for n in 1..=3usize {
        for j in 1..=q {
            let mut total = 0.0;
            for_each_composition(j, n, &mut |beta| {
                let mut multinomial = factorial(j);
                let mut prod = 1.0;
                for &b in beta {
                    multinomial /= factorial(b);
                    let f = 2f64.powi(b as i32) * m[b as usize];
                    prod *= f * f;
                }
                total += multinomial * prod;
            });
            best = best.max(total.sqrt());
        }
    }
    best
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn for_each_composition(total: u32, parts: usize, f: &mut impl FnMut(&[u32])) {
    fn rec(rest: u32, parts: usize, cur: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
        if cur.len() + 1 == parts {
            cur.push(rest);
            f(cur);
            cur.pop();
            return;
        }
        for b in 0..=rest {
            cur.push(b);
            rec(rest - b, parts, cur, f);
            cur.pop();
        }
    }
    rec(total, parts, &mut Vec::new(), f);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_boundary_conditions() {
        for q in 0..5 {
            let s = Smoothstep::new(q);
            assert!((horner(&s.derivs[0], 1.0) - 1.0).abs() < 1e-12);
            assert_eq!(horner(&s.derivs[0], 0.0), 0.0);
            for j in 1..=q {
                assert!(horner(&s.derivs[j as usize], 1.0).abs() < 1e-9, "q={q} j={j}");
                assert!(horner(&s.derivs[j as usize], 0.0).abs() < 1e-12);
            }
        }
        // S_1 = 3s² − 2s³.
        assert_eq!(Smoothstep::new(1).derivs[0], vec![0.0, 0.0, 3.0, -2.0]);
        assert!((Smoothstep::new(1).max_abs(1) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn profile_support() {
        let p = CutoffProfile::new(0.25, 2).unwrap();
        assert_eq!(p.value(&[0.1, 0.5]), 0.0);
        assert_eq!(p.value(&[0.125, 0.5]), 0.0);
        assert_eq!(p.value(&[0.3, 0.7]), 1.0);
        assert_eq!(p.value(&[0.5, 0.5]), 1.0);
        let mid = p.value(&[0.2, 0.5]);
        assert!(mid > 0.0 && mid < 1.0);
        assert_eq!(p.derivative(&[0.1, 0.4], &[1, 1]), 0.0);
        assert!(CutoffProfile::new(0.5, 1).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = CutoffProfile::new(0.3, 3).unwrap();
        let h = 1e-6;
        for x in [0.2, 0.25, 0.8, 0.86] {
            let fd = (p.value(&[x + h]) - p.value(&[x - h])) / (2.0 * h);
            assert!((p.derivative(&[x], &[1]) - fd).abs() < 1e-5, "{x}");
        }
    }

    #[test]
    fn derivative_bound_holds_on_samples() {
        for q in 1..4 {
            for delta in [0.05, 0.2] {
                let p = CutoffProfile::new(delta, q).unwrap();
                for i in 0..400 {
                    let x = i as f64 / 400.0;
                    for j in 1..=q {
                        let d = p.derivative(&[x, 0.5], &[j, 0]).abs();
                        assert!(d <= p.constant() * delta.powi(-(j as i32)) * (1.0 + 1e-12));
                    }
                }
            }
        }
    }
}
