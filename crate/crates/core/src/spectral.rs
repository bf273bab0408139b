//! Laurent coefficients on circles, the rescaled fluctuation field and the
//! diagonal multipliers of the linearized dynamics.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{AleError, Result};
use crate::fourier;
use crate::growth::{steps_at, ClusterState};
use crate::scalar::Scalar;

/// Minimum number of DFT nodes used for extraction.
pub const MIN_DFT_NODES: usize = 4096;

/// Default truncation order for fluctuation statistics.
pub const DEFAULT_ORDER: usize = 64;

/// Truncated expansion `sum_k coeffs[k] z^{-k}` obtained on the circle `|z| = radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LaurentSeries<T> {
    pub coeffs: Vec<Complex<T>>,
    pub radius: T,
    /// Grid supremum of `|f|` on the extraction circle.
    pub sup_abs: T,
}

impl<T: Scalar> LaurentSeries<T> {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluates the truncated series (Horner in `1/z`).
    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        let w = z.inv();
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &a| acc * w + a)
    }

    /// Bound on the truncation error at `|z| = r_eval`:
    /// `sup|f| (r/r_eval)^K / (1 - r/r_eval)`.
    pub fn tail_bound(&self, r_eval: T) -> T {
        let q = self.radius / r_eval;
        if q >= T::one() {
            return T::infinity();
        }
        self.sup_abs * q.powi(self.order() as i32) / (T::one() - q)
    }

    /// `sum_k |coeffs[k]|^2 r^{-2k}`.
    pub fn parseval_norm_sqr(&self, r: T) -> T {
        let w = (r * r).recip();
        let mut scale = T::one();
        let mut acc = T::zero();
        for a in &self.coeffs {
            acc += a.norm_sqr() * scale;
            scale *= w;
        }
        acc
    }
}

/// DFT node count for order `k`: `max(4K, 4096)`.
pub fn dft_nodes(order: usize) -> usize {
    (4 * order).max(MIN_DFT_NODES)
}

/// Extracts `order` Laurent coefficients of `f` on `|z| = r`.
pub fn laurent_extract<T, F>(f: F, r: T, order: usize) -> Result<LaurentSeries<T>>
where
    T: Scalar,
    F: Fn(Complex<T>) -> Complex<T>,
{
    let m = dft_nodes(order);
    let samples: Vec<Complex<T>> = (0..m)
        .map(|j| {
            f(Complex::from_polar(
                r,
                T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m),
            ))
        })
        .collect();
    laurent_from_samples(&samples, r, order)
}

/// Laurent coefficients from samples of `f` on `m` uniform nodes of
/// `|z| = r` (node `j` at angle `2 pi j / m`).
pub fn laurent_from_samples<T: Scalar>(
    samples: &[Complex<T>],
    r: T,
    order: usize,
) -> Result<LaurentSeries<T>> {
    if !(r > T::one()) {
        return Err(AleError::Extraction(format!(
            "extraction radius must exceed 1, got {r}"
        )));
    }
    let m = samples.len();
    if order == 0 || 2 * order > m {
        return Err(AleError::Extraction(format!(
            "order {order} needs at most half of {m} nodes"
        )));
    }
    let mut sup_abs = T::zero();
    for s in samples {
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(AleError::Extraction(
                "non-finite sample on the extraction circle".into(),
            ));
        }
        sup_abs = sup_abs.max(s.norm());
    }
    let modes = fourier::mean_against_positive_modes(samples);
    let mut scale = T::one();
    let coeffs = modes[..order]
        .iter()
        .map(|&a| {
            let v = a * scale;
            scale *= r;
            v
        })
        .collect();
    Ok(LaurentSeries {
        coeffs,
        radius: r,
        sup_abs,
    })
}

/// Default extraction radius `max(e^sigma, 1 + 4 sqrt(c))`.
pub fn default_radius<T: Scalar>(c: T, sigma: T) -> T {
    sigma.exp().max(T::one() + T::lit(4.0) * c.sqrt())
}

/// `(e^{-cap_n} Phi_n(z) - z) / sqrt(c)` with `n = n(t)`.
pub fn fluctuation_field<T: Scalar>(
    state: &ClusterState<T>,
    t: T,
    z: Complex<T>,
) -> Result<Complex<T>> {
    let n = snapshot_index(state, t)?;
    let w = state.phi_eval_at(n, z)?;
    Ok(field_value(state, n, z, w))
}

#[inline]
fn field_value<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    z: Complex<T>,
    w: Complex<T>,
) -> Complex<T> {
    let scale = (-state.capacity_at(n)).exp();
    (w * scale - z) / state.params().c.sqrt()
}

fn snapshot_index<T: Scalar>(state: &ClusterState<T>, t: T) -> Result<usize> {
    let n = steps_at(t, state.params().c);
    if n > state.len() {
        return Err(AleError::InvalidParameter(format!(
            "time {t} needs {n} steps but the run has {}",
            state.len()
        )));
    }
    Ok(n)
}

/// Laurent coefficients of the fluctuation field at step `n`.
pub fn field_series_at<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    order: usize,
    r: T,
) -> Result<LaurentSeries<T>> {
    if n > state.len() {
        return Err(AleError::InvalidParameter(format!(
            "step {n} beyond run length {}",
            state.len()
        )));
    }
    if !(r > T::one()) {
        return Err(AleError::Extraction(format!(
            "extraction radius must exceed 1, got {r}"
        )));
    }
    laurent_extract(
        |z| field_value(state, n, z, state.phi_eval_unchecked(n, z)),
        r,
        order,
    )
}

/// Field coefficients `A~(t, k)` at a list of snapshot times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CoefficientProcess<T> {
    pub times: Vec<T>,
    pub steps: Vec<usize>,
    pub radius: T,
    /// `coeffs[i][k]` is `A~(times[i], k)`.
    pub coeffs: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> CoefficientProcess<T> {
    pub fn order(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    /// Index of the snapshot at time `t` (exact match).
    pub fn time_index(&self, t: T) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }
}

pub fn coefficient_process<T: Scalar>(
    state: &ClusterState<T>,
    times: &[T],
    order: usize,
    r: T,
) -> Result<CoefficientProcess<T>> {
    let mut steps = Vec::with_capacity(times.len());
    let mut coeffs = Vec::with_capacity(times.len());
    for &t in times {
        let n = snapshot_index(state, t)?;
        steps.push(n);
        coeffs.push(field_series_at(state, n, order, r)?.coeffs);
    }
    Ok(CoefficientProcess {
        times: times.to_vec(),
        steps,
        radius: r,
        coeffs,
    })
}

/// Parameters of the diagonal multiplier `p(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MultiplierSpec<T> {
    pub c: T,
    pub sigma: T,
    pub eta: T,
    /// Number of indices `k = 0..order`.
    pub order: usize,
}

/// `p(k) = e^{-c(k+1)} + c eta k e^{-sigma(k+1)}`.
pub fn multiplier_p<T: Scalar>(spec: &MultiplierSpec<T>, k: usize) -> T {
    let k1 = T::from_usize_lossy(k + 1);
    let kk = T::from_usize_lossy(k);
    (-spec.c * k1).exp() + spec.c * spec.eta * kk * (-spec.sigma * k1).exp()
}

/// `p_0(k)`: `e^{c(1+(1-eta)k)} p(k)` for `eta >= 0`, `e^{c(k+1)} p(k)` for
/// `eta < 0`. The prefactor is folded into the exponents so large `k` does
/// not overflow.
pub fn multiplier_p0<T: Scalar>(spec: &MultiplierSpec<T>, k: usize) -> T {
    let (c, s, eta) = (spec.c, spec.sigma, spec.eta);
    let kk = T::from_usize_lossy(k);
    let k1 = kk + T::one();
    let growth = if eta < T::zero() {
        c * k1
    } else {
        c * (T::one() + (T::one() - eta) * kk)
    };
    (growth - c * k1).exp() + c * eta * kk * (growth - s * k1).exp()
}

/// `coeffs[k] <- p(k)^n coeffs[k]`.
pub fn apply_p<T: Scalar>(
    series: &LaurentSeries<T>,
    spec: &MultiplierSpec<T>,
    n: i32,
) -> Result<LaurentSeries<T>> {
    if series.order() > spec.order {
        return Err(AleError::InvalidParameter(format!(
            "series order {} exceeds multiplier order {}",
            series.order(),
            spec.order
        )));
    }
    let mut out = series.clone();
    for (k, a) in out.coeffs.iter_mut().enumerate() {
        *a = *a * multiplier_p(spec, k).powi(n);
    }
    Ok(out)
}

/// Outcome of scanning `0 <= p_0(k+1) <= p_0(k) <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MonotonicityReport<T> {
    pub passed: bool,
    /// First `k` at which the chain fails, with `p_0(k)` and `p_0(k+1)`.
    pub first_violation: Option<(usize, T, T)>,
}

/// Scans `k = 0..order-1`. Comparisons allow a few ulps, since `p_0` is
/// flat to rounding when `eta` is near 0.
pub fn p0_monotonicity_check<T: Scalar>(spec: &MultiplierSpec<T>) -> MonotonicityReport<T> {
    let slack = T::one() + T::lit(8.0) * T::epsilon();
    let mut prev = multiplier_p0(spec, 0);
    let fail = |k, a, b| MonotonicityReport {
        passed: false,
        first_violation: Some((k, a, b)),
    };
    if !(prev <= slack) {
        return fail(0, prev, prev);
    }
    for k in 0..spec.order.saturating_sub(1) {
        let next = multiplier_p0(spec, k + 1);
        if !(next >= T::zero() && next <= prev * slack) {
            return fail(k, prev, next);
        }
        prev = next;
    }
    MonotonicityReport {
        passed: true,
        first_violation: None,
    }
}
