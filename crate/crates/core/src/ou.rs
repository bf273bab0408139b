//! Limiting Ornstein-Uhlenbeck coefficient processes and the limit field
//! `F(t, z) = sum_k A(t, k) z^{-k}`.
//!
//! Convention: each complex Brownian motion has independent standard real
//! and imaginary parts, so every real component of `A(t, k)` started at 0
//! has variance `(1 - e^{-2 lambda_k t}) / lambda_k`.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AleError, Result};
use crate::scalar::Scalar;

/// Tail tolerance for the truncated limit field.
pub const FIELD_TAIL_TOL: f64 = 1.0e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OuParams<T> {
    pub eta: T,
    pub k: usize,
}

impl<T: Scalar> OuParams<T> {
    pub fn new(eta: T, k: usize) -> Self {
        Self { eta, k }
    }

    /// `lambda_k = 1 + (1 - eta) k`.
    pub fn lambda(&self) -> T {
        T::one() + (T::one() - self.eta) * T::from_usize_lossy(self.k)
    }
}

/// `(1 - e^{-2 lambda dt}) / lambda`, computed without cancellation for small `dt`.
fn transition_variance<T: Scalar>(lambda: T, dt: T) -> T {
    -(-T::lit(2.0) * lambda * dt).exp_m1() / lambda
}

/// Exact transition `a' = e^{-lambda dt} a + G`.
pub fn ou_exact_step<T: Scalar, R: Rng + ?Sized>(
    a: Complex<T>,
    dt: T,
    params: &OuParams<T>,
    rng: &mut R,
) -> Complex<T> {
    let lambda = params.lambda();
    let sd = transition_variance(lambda, dt).sqrt();
    let g = Complex::new(T::sample_normal(rng) * sd, T::sample_normal(rng) * sd);
    a * (-lambda * dt).exp() + g
}

/// Per-component covariance `(e^{-lambda|s-t|} - e^{-lambda(s+t)}) / lambda`.
pub fn ou_covariance<T: Scalar>(s: T, t: T, params: &OuParams<T>) -> T {
    let lambda = params.lambda();
    let lo = (s - t).abs();
    let hi = s + t;
    (-lambda * lo).exp() * -(-lambda * (hi - lo)).exp_m1() / lambda
}

/// Samples `A(t, k)` from its time-`t` marginal (started at 0).
pub fn ou_marginal_sample<T: Scalar, R: Rng + ?Sized>(
    t: T,
    params: &OuParams<T>,
    rng: &mut R,
) -> Complex<T> {
    ou_exact_step(Complex::new(T::zero(), T::zero()), t, params, rng)
}

/// Smallest `K` with `r^{-K} / (1 - 1/r) < FIELD_TAIL_TOL`.
pub fn truncation_for_radius<T: Scalar>(r_min: T) -> Result<usize> {
    if !(r_min > T::one()) {
        return Err(AleError::InvalidParameter(format!(
            "radius must exceed 1, got {r_min}"
        )));
    }
    let q = r_min.recip();
    let need = (T::lit(FIELD_TAIL_TOL) * (T::one() - q)).ln() / q.ln();
    Ok(need.to_f64_lossy().floor() as usize + 1)
}

/// One draw of the truncated limit field at time `t` on `z_grid`.
pub fn limit_field_sample<T: Scalar, R: Rng + ?Sized>(
    t: T,
    z_grid: &[Complex<T>],
    order: usize,
    eta: T,
    rng: &mut R,
) -> Result<Vec<Complex<T>>> {
    let r_min = z_grid.iter().map(|z| z.norm()).fold(T::infinity(), T::min);
    if !(r_min > T::one()) {
        return Err(AleError::InvalidParameter(format!(
            "limit field needs |z| > 1, got {r_min}"
        )));
    }
    let q = r_min.recip();
    let tail = q.powi(order as i32) / (T::one() - q);
    if !(tail < T::lit(FIELD_TAIL_TOL)) {
        return Err(AleError::TruncationInsufficient {
            tail_bound: tail.to_f64_lossy(),
            tolerance: FIELD_TAIL_TOL,
        });
    }
    let coeffs: Vec<Complex<T>> = (0..order)
        .map(|k| ou_marginal_sample(t, &OuParams::new(eta, k), rng))
        .collect();
    Ok(z_grid
        .iter()
        .map(|&z| {
            let w = z.inv();
            coeffs
                .iter()
                .rev()
                .fold(Complex::new(T::zero(), T::zero()), |acc, &a| acc * w + a)
        })
        .collect())
}

/// One row of a reference covariance table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CovarianceRow<T> {
    pub s: T,
    pub t: T,
    pub k: usize,
    pub eta: T,
    pub value: T,
}

/// Reference covariances for every `(s, t)` pair, mode and `eta`.
pub fn covariance_table<T: Scalar>(
    times: &[T],
    modes: &[usize],
    etas: &[T],
) -> Vec<CovarianceRow<T>> {
    let mut rows = Vec::with_capacity(times.len() * times.len() * modes.len() * etas.len());
    for &eta in etas {
        for &k in modes {
            let p = OuParams::new(eta, k);
            for &s in times {
                for &t in times {
                    rows.push(CovarianceRow {
                        s,
                        t,
                        k,
                        eta,
                        value: ou_covariance(s, t, &p),
                    });
                }
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn covariance_closed_forms() {
        let p = OuParams::new(0.0_f64, 0);
        assert_eq!(ou_covariance(0.0, 3.0, &p), 0.0);
        let v = ou_covariance(1.0, 1.0, &p);
        assert!((v - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.864665).abs() < 1e-6);
        let p2 = OuParams::new(0.0_f64, 1);
        assert!((ou_covariance(1.0, 1.0, &p2) - 0.490842).abs() < 1e-6);
        assert!((ou_covariance(60.0, 60.0, &p2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lambda_rule() {
        assert_eq!(OuParams::new(1.0_f64, 7).lambda(), 1.0);
        assert_eq!(OuParams::new(0.5_f64, 4).lambda(), 3.0);
        assert_eq!(OuParams::new(0.0_f64, 0).lambda(), 1.0);
    }

    #[test]
    fn half_steps_compose_in_closed_form() {
        let lambda = 2.5_f64;
        let dt = 0.3;
        let half = transition_variance(lambda, dt / 2.0);
        let composed = (-lambda * dt).exp() * half + half;
        assert!((composed - transition_variance(lambda, dt)).abs() < 1e-15);
    }

    #[test]
    fn tiny_step_from_zero_stays_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = ou_exact_step(
            Complex::new(0.0, 0.0),
            1e-12,
            &OuParams::new(0.0_f64, 3),
            &mut rng,
        );
        assert!(a.norm() < 1e-5);
    }

    #[test]
    fn truncation_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = [Complex::new(1.1_f64, 0.0)];
        assert!(matches!(
            limit_field_sample(1.0, &z, 10, 0.0, &mut rng),
            Err(AleError::TruncationInsufficient { .. })
        ));
        let k = truncation_for_radius(1.1_f64).unwrap();
        assert!(limit_field_sample(1.0, &z, k, 0.0, &mut rng).is_ok());
        assert!(limit_field_sample(1.0, &z, k - 1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn field_at_time_zero_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = [Complex::new(2.0_f64, 0.0), Complex::new(0.0, -3.0)];
        let v = limit_field_sample(0.0, &z, 40, 0.5, &mut rng).unwrap();
        assert!(v.iter().all(|w| w.norm() == 0.0));
    }

    #[test]
    fn table_shape() {
        let rows = covariance_table(&[0.5_f64, 1.0], &[1, 2, 3], &[0.0, 1.0]);
        assert_eq!(rows.len(), 2 * 2 * 3 * 2);
        assert!(rows.iter().all(|r| r.value > 0.0));
    }
}
