//! Thin FFT helpers over `rustfft` for circle quadrature.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Scalar;

/// `out[k] = (1/M) sum_m values[m] e^{+2 pi i k m / M}`: the discrete Laurent
/// coefficient transform of samples on `M` uniform nodes.
pub(crate) fn mean_against_positive_modes<T: Scalar>(values: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = values.to_vec();
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = T::one() / T::from_usize_lossy(values.len());
    for v in &mut buf {
        *v = *v * scale;
    }
    buf
}

/// In-place unnormalized forward transform.
pub(crate) fn forward<T: Scalar>(buf: &mut [Complex<T>]) {
    FftPlanner::<T>::new()
        .plan_fft_forward(buf.len())
        .process(buf);
}

/// `out[k] = (1/M) sum_m samples[m] e^{-2 pi i k m / M}` for real samples.
pub(crate) fn real_spectrum<T: Scalar>(samples: &[T]) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = samples
        .iter()
        .map(|&x| Complex::new(x, T::zero()))
        .collect();
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    let scale = T::one() / T::from_usize_lossy(samples.len());
    for v in &mut buf {
        *v = *v * scale;
    }
    buf
}

/// Trigonometric interpolation of real periodic samples onto a finer uniform
/// grid of `target` nodes (`target` a multiple of `samples.len()`).
///
/// Returns `None` when the upper half of the resolved spectrum exceeds
/// `tail_tol` (absolute), i.e. the coarse grid does not resolve the function.
pub(crate) fn spectral_upsample<T: Scalar>(
    samples: &[T],
    target: usize,
    tail_tol: T,
) -> Option<Vec<T>> {
    let coarse = samples.len();
    debug_assert!(coarse.is_power_of_two() && target % coarse == 0);
    let mut planner = FftPlanner::<T>::new();
    let mut spec: Vec<Complex<T>> = samples
        .iter()
        .map(|&x| Complex::new(x, T::zero()))
        .collect();
    planner.plan_fft_forward(coarse).process(&mut spec);
    let inv = T::one() / T::from_usize_lossy(coarse);
    let half = coarse / 2;
    let tail = spec[coarse / 4..=half]
        .iter()
        .map(|c| c.norm() * inv)
        .fold(T::zero(), T::max);
    if !(tail <= tail_tol) {
        return None;
    }
    if target == coarse {
        return Some(samples.to_vec());
    }
    let mut fine = vec![Complex::new(T::zero(), T::zero()); target];
    for k in 0..half {
        fine[k] = spec[k] * inv;
    }
    for k in 1..half {
        fine[target - k] = spec[coarse - k] * inv;
    }
    let nyq = spec[half] * inv * T::lit(0.5);
    fine[half] = nyq;
    fine[target - half] = nyq;
    planner.plan_fft_inverse(target).process(&mut fine);
    Some(fine.into_iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_reproduces_band_limited_signal() {
        let f = |t: f64| 0.3 + (3.0 * t).cos() - 0.2 * (7.0 * t).sin();
        let coarse: Vec<f64> = (0..64)
            .map(|m| f(std::f64::consts::TAU * m as f64 / 64.0))
            .collect();
        let fine = spectral_upsample(&coarse, 1024, 1e-12).unwrap();
        for (m, v) in fine.iter().enumerate() {
            let t = std::f64::consts::TAU * m as f64 / 1024.0;
            assert!((v - f(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn upsample_refuses_unresolved_signal() {
        let coarse: Vec<f64> = (0..32)
            .map(|m| (13.0 * std::f64::consts::TAU * m as f64 / 32.0).cos())
            .collect();
        assert!(spectral_upsample(&coarse, 256, 1e-12).is_none());
    }

    #[test]
    fn positive_mode_means() {
        let m = 16;
        let vals: Vec<Complex<f64>> = (0..m)
            .map(|j| Complex::from_polar(1.0, -3.0 * std::f64::consts::TAU * j as f64 / m as f64))
            .collect();
        let out = mean_against_positive_modes(&vals);
        assert!((out[3] - Complex::new(1.0, 0.0)).norm() < 1e-14);
        assert!(out[2].norm() < 1e-14);
    }
}
