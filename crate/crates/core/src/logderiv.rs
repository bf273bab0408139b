//! Incremental representation of `L_n = log Phi_n'` outside a fixed circle.
//!
//! `L_n` is analytic in `{|z| > 1}` and real at infinity, so it is fixed by
//! `u = Re L_n` on the circle `|z| = r`. Writing `L_n(z) = sum_k b_k (r/z)^k`,
//! the `b_k` come from the spectrum of `u`, and the chain rule
//! `L_n(z) = L_{n-1}(F_n(z)) + log F_n'(z)` updates them one particle at a
//! time at a cost independent of `n`. Since `|F_n(z)| >= |z|`, the previous
//! series is only ever evaluated where it converges at least as fast as on
//! the circle itself.

use num_complex::Complex;

use crate::fourier;
use crate::particle::ParticleMap;
use crate::scalar::Scalar;

/// Absolute tolerance on the unresolved part of the spectrum.
const TAIL_TOL: f64 = 1.0e-12;
/// Coefficients below this are dropped from the evaluated series.
const COEFF_FLOOR: f64 = 1.0e-15;
const START_GRID: usize = 256;
pub(crate) const MAX_GRID: usize = 1 << 15;

#[derive(Debug, Clone)]
pub(crate) struct LogDerivCache<T> {
    radius: T,
    /// `log|Phi_n'|` at `M` uniform nodes of the circle.
    samples: Vec<T>,
    /// `b_k`, truncated after the last coefficient above the floor.
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> LogDerivCache<T> {
    /// `Phi_0 = id`, so `L_0 = 0`. Requires `radius > 1`.
    pub(crate) fn identity(radius: T) -> Option<Self> {
        if !(radius > T::one()) {
            return None;
        }
        Some(Self {
            radius,
            samples: vec![T::zero(); START_GRID],
            coeffs: vec![Complex::new(T::zero(), T::zero())],
        })
    }

    pub(crate) fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub(crate) fn grid(&self) -> usize {
        self.samples.len()
    }

    /// `Re L(w)` for `|w| >= radius`.
    #[inline]
    pub(crate) fn eval_re(&self, w: Complex<T>) -> T {
        let q = w.inv() * self.radius;
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &b| acc * q + b)
            .re
    }

    /// Cache for `Phi_{n+1} = Phi_n o f`. `None` if the spectrum cannot be
    /// resolved on `MAX_GRID` nodes or a sample is not finite.
    pub(crate) fn advance(&self, f: &ParticleMap<T>) -> Option<Self> {
        let tol = T::lit(TAIL_TOL);
        let mut m = self.grid();
        while m <= MAX_GRID {
            let mut samples = Vec::with_capacity(m);
            for j in 0..m {
                let theta = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m);
                let z = Complex::from_polar(self.radius, theta);
                let (w, d) = f.eval_with_deriv_unchecked(z);
                let u = self.eval_re(w) + d.norm().ln();
                if !u.is_finite() {
                    return None;
                }
                samples.push(u);
            }
            let spec = fourier::real_spectrum(&samples);
            let tail = spec[m / 4..=m / 2]
                .iter()
                .map(|x| x.norm())
                .fold(T::zero(), T::max);
            if tail <= tol {
                return Some(Self {
                    radius: self.radius,
                    coeffs: series_from_spectrum(&spec),
                    samples,
                });
            }
            m *= 2;
        }
        None
    }

    /// `L_n = log Phi_n'` at `target` uniform nodes of the circle.
    pub(crate) fn complex_values_on(&self, target: usize) -> Vec<Complex<T>> {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); target];
        for (k, b) in self.coeffs.iter().enumerate() {
            buf[k % target] += *b;
        }
        fourier::forward(&mut buf);
        buf
    }

    /// `log|Phi_n'|` at `target` uniform nodes.
    pub(crate) fn values_on(&self, target: usize) -> Option<Vec<T>> {
        let m = self.grid();
        if target >= m {
            fourier::spectral_upsample(&self.samples, target, T::lit(TAIL_TOL))
        } else {
            let stride = m / target;
            Some(self.samples.iter().step_by(stride).copied().collect())
        }
    }
}

fn series_from_spectrum<T: Scalar>(spec: &[Complex<T>]) -> Vec<Complex<T>> {
    let half = spec.len() / 2;
    let floor = T::lit(COEFF_FLOOR);
    let mut coeffs: Vec<Complex<T>> = Vec::with_capacity(half);
    coeffs.push(Complex::new(spec[0].re, T::zero()));
    for x in &spec[1..half] {
        coeffs.push(x.conj() * T::lit(2.0));
    }
    let keep = coeffs
        .iter()
        .rposition(|b| b.norm() > floor)
        .map_or(1, |i| i + 1);
    coeffs.truncate(keep);
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_matches_direct_log_derivative() {
        let f = ParticleMap::slit(0.01_f64).unwrap().rotated(1.1);
        let r = 1.08;
        let cache = LogDerivCache::identity(r).unwrap().advance(&f).unwrap();
        for j in 0..50 {
            let w = Complex::from_polar(r * (1.0 + 0.01 * j as f64), 0.37 * j as f64);
            let direct = f.deriv(w).unwrap().norm().ln();
            assert!((cache.eval_re(w) - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn complex_values_match_derivative() {
        let f = ParticleMap::slit(0.02_f64).unwrap().rotated(2.0);
        let g = ParticleMap::slit(0.02_f64).unwrap().rotated(2.3);
        let r = 1.1;
        let cache = LogDerivCache::identity(r)
            .unwrap()
            .advance(&g)
            .unwrap()
            .advance(&f)
            .unwrap();
        let m = 512;
        let vals = cache.complex_values_on(m);
        for (j, l) in vals.iter().enumerate().step_by(17) {
            let z = Complex::from_polar(r, std::f64::consts::TAU * j as f64 / m as f64);
            let d = g.deriv(f.eval(z).unwrap()).unwrap() * f.deriv(z).unwrap();
            assert!((l.exp() - d).norm() < 1e-10 * d.norm());
        }
    }

    #[test]
    fn unresolvable_on_unit_circle() {
        assert!(LogDerivCache::<f64>::identity(1.0).is_none());
    }
}
