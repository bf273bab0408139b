//! Circle norms, deviation from the growing disk, the increment identities
//! behind the drift expansion, the stopping-time monitor and ensemble
//! statistics.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{AleError, Result};
use crate::growth::{run_with_snapshots, steps_at, ClusterState, ModelParams};
use crate::scalar::Scalar;
use crate::spectral::CoefficientProcess;

/// Quadrature nodes for circle norms and sup-norms.
pub const NORM_NODES: usize = 4096;

/// Smallest ensemble accepted by [`covariance_estimator`].
pub const MIN_ENSEMBLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormSpec<T> {
    /// Exponent in `[1, inf]`.
    pub p: T,
    pub r: T,
    pub nodes: usize,
}

impl<T: Scalar> NormSpec<T> {
    pub fn new(p: T, r: T) -> Self {
        Self {
            p,
            r,
            nodes: NORM_NODES,
        }
    }

    pub fn sup(r: T) -> Self {
        Self::new(T::infinity(), r)
    }
}

/// Uniform nodes `r e^{2 pi i j / m}`.
pub fn circle_nodes<T: Scalar>(r: T, m: usize) -> impl Iterator<Item = Complex<T>> {
    (0..m).map(move |j| {
        Complex::from_polar(
            r,
            T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m),
        )
    })
}

/// `(mean_j |f(z_j)|^p)^{1/p}` on the circle, or the node maximum for `p = inf`.
pub fn circle_norm<T, F>(f: F, spec: &NormSpec<T>) -> Result<T>
where
    T: Scalar,
    F: Fn(Complex<T>) -> Complex<T>,
{
    if !(spec.p >= T::one()) || spec.nodes == 0 {
        return Err(AleError::InvalidParameter(format!(
            "norm needs p >= 1 and at least one node, got p = {}",
            spec.p
        )));
    }
    let mut moduli = Vec::with_capacity(spec.nodes);
    for z in circle_nodes(spec.r, spec.nodes) {
        let v = f(z);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(AleError::Domain {
                re: z.re.to_f64_lossy(),
                im: z.im.to_f64_lossy(),
            });
        }
        moduli.push(v.norm());
    }
    Ok(norm_of_moduli(&moduli, spec.p))
}

fn norm_of_moduli<T: Scalar>(moduli: &[T], p: T) -> T {
    if p.is_infinite() {
        return moduli.iter().copied().fold(T::zero(), T::max);
    }
    let scale = moduli.iter().copied().fold(T::zero(), T::max);
    if scale == T::zero() {
        return T::zero();
    }
    let mean =
        moduli.iter().map(|&m| (m / scale).powf(p)).sum::<T>() / T::from_usize_lossy(moduli.len());
    scale * mean.powf(p.recip())
}

/// Deviation of `Phi_{n(t)}` from `e^{cap} z` on one circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeviationRecord<T> {
    pub t: T,
    pub r: T,
    pub sup_dev: T,
    pub norm2_dev: T,
}

pub fn disk_deviation<T: Scalar>(
    state: &ClusterState<T>,
    t: T,
    r: T,
) -> Result<DeviationRecord<T>> {
    let n = steps_at(t, state.params().c);
    if n > state.len() {
        return Err(AleError::InvalidParameter(format!(
            "time {t} needs {n} steps but the run has {}",
            state.len()
        )));
    }
    let (sup_dev, norm2_dev) = deviation_at_step(state, n, r)?;
    Ok(DeviationRecord {
        t,
        r,
        sup_dev,
        norm2_dev,
    })
}

/// `(sup, 2-norm)` of `Phi_n(z) - e^{cap_n} z` on `|z| = r`.
pub fn deviation_at_step<T: Scalar>(state: &ClusterState<T>, n: usize, r: T) -> Result<(T, T)> {
    check_radius(r)?;
    let growth = state.capacity_at(n).exp();
    let moduli: Vec<T> = circle_nodes(r, NORM_NODES)
        .map(|z| (state.phi_eval_unchecked(n, z) - z * growth).norm())
        .collect();
    if moduli.iter().any(|m| !m.is_finite()) {
        return Err(AleError::Domain {
            re: r.to_f64_lossy(),
            im: 0.0,
        });
    }
    Ok((
        norm_of_moduli(&moduli, T::infinity()),
        norm_of_moduli(&moduli, T::lit(2.0)),
    ))
}

fn check_radius<T: Scalar>(r: T) -> Result<()> {
    if r > T::one() {
        Ok(())
    } else {
        Err(AleError::InvalidParameter(format!(
            "radius must exceed 1, got {r}"
        )))
    }
}

fn check_step<T: Scalar>(state: &ClusterState<T>, n: usize) -> Result<()> {
    if n == 0 || n > state.len() + 1 {
        return Err(AleError::InvalidParameter(format!(
            "increment index must lie in 1..={}, got {n}",
            state.len() + 1
        )));
    }
    Ok(())
}

/// `Delta_n(theta, z) = Phi_{n-1}(e^{i theta} F(e^{-i theta} z)) - Phi_{n-1}(e^c z)`
/// with `F` the basic map at capacity `c`. `n` may be one past the history.
pub fn increment_delta<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    theta: T,
    z: Complex<T>,
) -> Result<Complex<T>> {
    check_step(state, n)?;
    if !(z.norm() > T::one()) {
        return Err(AleError::Domain {
            re: z.re.to_f64_lossy(),
            im: z.im.to_f64_lossy(),
        });
    }
    let f = state.base_map().rotated(theta);
    let c = state.params().c;
    let moved = state.phi_eval_at(n - 1, f.eval(z)?)?;
    let grown = state.phi_eval_at(n - 1, z * c.exp())?;
    Ok(moved - grown)
}

fn delta_on_nodes<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    z: Complex<T>,
    m: usize,
) -> Result<Vec<Complex<T>>> {
    check_step(state, n)?;
    let c = state.params().c;
    let grown = state.phi_eval_at(n - 1, z * c.exp())?;
    let base = state.base_map();
    (0..m)
        .map(|j| {
            let theta = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m);
            let rot = Complex::from_polar(T::one(), theta);
            let w = rot * base.eval(z * rot.conj())?;
            Ok(state.phi_eval_at(n - 1, w)? - grown)
        })
        .collect()
}

/// `mean_theta Delta_n(theta, z)` on `m` nodes; zero by Cauchy's theorem.
pub fn cauchy_mean<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    z: Complex<T>,
    m: usize,
) -> Result<Complex<T>> {
    let d = delta_on_nodes(state, n, z, m)?;
    Ok(d.iter().copied().sum::<Complex<T>>() / T::from_usize_lossy(m))
}

/// `A_n(z) = mean_theta Delta_n(theta, z) h_n(theta)` on `m` nodes.
pub fn drift_term<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    z: Complex<T>,
    m: usize,
) -> Result<Complex<T>> {
    let d = delta_on_nodes(state, n, z, m)?;
    let h = state.attachment_density_at(n - 1, m)?;
    let total: Complex<T> = d.iter().zip(h.weights()).map(|(&a, &w)| a * w).sum();
    Ok(total / T::from_usize_lossy(m))
}

/// `-c eta e^{cn} z Phi~'_{n-1}(e^sigma z)`, the leading order of `A_n(z)`.
pub fn drift_leading_order<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    z: Complex<T>,
) -> Result<Complex<T>> {
    check_step(state, n)?;
    let p = state.params();
    let cap = state.capacity_at(n - 1);
    let d = state.phi_deriv_at(n - 1, z * state.sigma().exp())?;
    let fluct = d * (-cap).exp() - T::one();
    Ok(-z * fluct * (p.c * p.eta * (cap + p.c).exp()))
}

/// `|A_n(z) - leading order|`.
pub fn drift_residual<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    z: Complex<T>,
    m: usize,
) -> Result<T> {
    Ok((drift_term(state, n, z, m)? - drift_leading_order(state, n, z)?).norm())
}

/// `||Phi~'_n||_{inf, r}` with `Phi~_n = e^{-cap_n} Phi_n - id`, on `m` nodes.
/// On the circle `e^sigma` at the current step the incremental cache is used
/// when active.
pub fn fluctuation_deriv_sup<T: Scalar>(
    state: &ClusterState<T>,
    n: usize,
    r: T,
    m: usize,
) -> Result<T> {
    check_radius(r)?;
    if n > state.len() {
        return Err(AleError::InvalidParameter(format!(
            "step {n} beyond run length {}",
            state.len()
        )));
    }
    let scale = (-state.capacity_at(n)).exp();
    if n == state.len() && r == state.sigma().exp() && state.uses_log_deriv_cache() {
        let sup = state
            .deriv_on_sigma_circle(m)
            .iter()
            .map(|&d| (d * scale - T::one()).norm())
            .fold(T::zero(), T::max);
        return if sup.is_finite() {
            Ok(sup)
        } else {
            Err(AleError::Singular {
                re: r.to_f64_lossy(),
                im: 0.0,
            })
        };
    }
    let mut sup = T::zero();
    for z in circle_nodes(r, m) {
        let (_, d) = state.phi_and_deriv_unchecked(n, z);
        let v = (d * scale - T::one()).norm();
        if !v.is_finite() {
            return Err(AleError::Singular {
                re: z.re.to_f64_lossy(),
                im: z.im.to_f64_lossy(),
            });
        }
        sup = sup.max(v);
    }
    Ok(sup)
}

/// `delta_0 = c^{1/2 - nu} / (e^sigma - 1)` for `eta < 1`, with the
/// denominator raised to `3/2` for `eta = 1`.
pub fn threshold_delta0<T: Scalar>(c: T, sigma: T, eta: T, nu: T) -> T {
    let gap = sigma.exp_m1();
    let num = c.powf(T::lit(0.5) - nu);
    if eta < T::one() {
        num / gap
    } else {
        num / gap.powf(T::lit(1.5))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ThresholdReport<T> {
    pub delta0: T,
    /// `(t, n(t), ||Phi~'_n||_{inf, e^sigma})` per snapshot.
    pub norms: Vec<(T, usize, T)>,
    pub first_crossing: Option<T>,
}

impl<T: Scalar> ThresholdReport<T> {
    pub fn crossed(&self) -> bool {
        self.first_crossing.is_some()
    }
}

pub fn threshold_monitor<T: Scalar>(
    state: &ClusterState<T>,
    nu: T,
    times: &[T],
) -> Result<ThresholdReport<T>> {
    let p = state.params();
    if p.eta > T::one() {
        return Err(AleError::InvalidParameter(format!(
            "threshold monitor needs eta <= 1, got {}",
            p.eta
        )));
    }
    let delta0 = threshold_delta0(p.c, state.sigma(), p.eta, nu);
    let r = state.sigma().exp();
    let mut norms = Vec::with_capacity(times.len());
    let mut first_crossing = None;
    for &t in times {
        let n = steps_at(t, p.c).min(state.len());
        let v = if n == 0 {
            T::zero()
        } else {
            fluctuation_deriv_sup(state, n, r, NORM_NODES)?
        };
        if first_crossing.is_none() && v > delta0 {
            first_crossing = Some(t);
        }
        norms.push((t, n, v));
    }
    Ok(ThresholdReport {
        delta0,
        norms,
        first_crossing,
    })
}

/// Runs `params` to the horizon and evaluates the monitor at each time in
/// `times` as the run reaches it. The norm at the current step is read from
/// the incremental log-derivative series when it is active, which makes this
/// much cheaper than [`threshold_monitor`] on a finished run.
pub fn monitored_run<T: Scalar>(
    params: ModelParams<T>,
    seed: u64,
    nu: T,
    times: &[T],
) -> Result<ThresholdReport<T>> {
    if params.eta > T::one() {
        return Err(AleError::InvalidParameter(format!(
            "threshold monitor needs eta <= 1, got {}",
            params.eta
        )));
    }
    let sigma = params.sigma();
    let delta0 = threshold_delta0(params.c, sigma, params.eta, nu);
    let r = sigma.exp();
    let mut norms = Vec::with_capacity(times.len());
    let mut first_crossing = None;
    run_with_snapshots(params, seed, times, |state, t| {
        let n = state.len();
        let v = if n == 0 {
            T::zero()
        } else {
            fluctuation_deriv_sup(state, n, r, NORM_NODES)?
        };
        if first_crossing.is_none() && v > delta0 {
            first_crossing = Some(t);
        }
        norms.push((t, n, v));
        Ok(())
    })?;
    Ok(ThresholdReport {
        delta0,
        norms,
        first_crossing,
    })
}

/// Least-squares fit of `log y` against `log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Regression<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
}

pub fn scaling_regression<T: Scalar>(records: &[(T, T)]) -> Result<Regression<T>> {
    let mut xs: Vec<T> = records.iter().map(|r| r.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    xs.dedup();
    if xs.len() < 3 {
        return Err(AleError::Degenerate(
            "need at least 3 distinct c values".into(),
        ));
    }
    if records
        .iter()
        .any(|&(x, y)| !(x > T::zero() && y > T::zero()))
    {
        return Err(AleError::Degenerate(
            "log-log fit needs positive data".into(),
        ));
    }
    let n = T::from_usize_lossy(records.len());
    let lx: Vec<T> = records.iter().map(|r| r.0.ln()).collect();
    let ly: Vec<T> = records.iter().map(|r| r.1.ln()).collect();
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let sxx: T = lx.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: T = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let syy: T = ly.iter().map(|&y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == T::zero() {
        T::one()
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(Regression {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// An ensemble mean with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Estimate<T> {
    pub estimate: T,
    pub stderr: T,
}

impl<T: Scalar> Estimate<T> {
    pub fn z_score(&self, reference: T) -> T {
        if self.stderr > T::zero() {
            (self.estimate - reference) / self.stderr
        } else if self.estimate == reference {
            T::zero()
        } else {
            T::infinity()
        }
    }
}

/// Mean of `values` with the delete-one jackknife standard error.
pub fn jackknife_mean<T: Scalar>(values: &[T]) -> Result<Estimate<T>> {
    let n = values.len();
    if n < 2 {
        return Err(AleError::InsufficientEnsemble { got: n, need: 2 });
    }
    let nf = T::from_usize_lossy(n);
    let total: T = values.iter().copied().sum();
    let mean = total / nf;
    let leave_one: Vec<T> = values
        .iter()
        .map(|&v| (total - v) / (nf - T::one()))
        .collect();
    let var: T = leave_one.iter().map(|&l| (l - mean) * (l - mean)).sum();
    Ok(Estimate {
        estimate: mean,
        stderr: (var * (nf - T::one()) / nf).sqrt(),
    })
}

fn snapshot<T: Scalar>(p: &CoefficientProcess<T>, t: T) -> Result<usize> {
    p.time_index(t)
        .ok_or_else(|| AleError::InvalidParameter(format!("no snapshot at time {t}")))
}

fn paired_products<T: Scalar, G>(
    ensemble: &[CoefficientProcess<T>],
    s: T,
    t: T,
    k: usize,
    l: usize,
    g: G,
) -> Result<Vec<T>>
where
    G: Fn(Complex<T>, Complex<T>) -> T,
{
    if ensemble.len() < MIN_ENSEMBLE {
        return Err(AleError::InsufficientEnsemble {
            got: ensemble.len(),
            need: MIN_ENSEMBLE,
        });
    }
    ensemble
        .iter()
        .map(|p| {
            let (i, j) = (snapshot(p, s)?, snapshot(p, t)?);
            let order = p.order();
            if k >= order || l >= order {
                return Err(AleError::InvalidParameter(format!(
                    "mode beyond order {order}"
                )));
            }
            Ok(g(p.coeffs[i][k], p.coeffs[j][l]))
        })
        .collect()
}

/// Per-component covariance `E[A~(s,k) (x) A~(t,k)]`, averaged over the two
/// diagonal entries (real-real and imaginary-imaginary).
pub fn covariance_estimator<T: Scalar>(
    ensemble: &[CoefficientProcess<T>],
    s: T,
    t: T,
    k: usize,
) -> Result<Estimate<T>> {
    cross_mode_covariance(ensemble, s, t, k, k)
}

/// Diagonal-averaged covariance between modes `k` and `l`.
pub fn cross_mode_covariance<T: Scalar>(
    ensemble: &[CoefficientProcess<T>],
    s: T,
    t: T,
    k: usize,
    l: usize,
) -> Result<Estimate<T>> {
    let half = T::lit(0.5);
    let v = paired_products(ensemble, s, t, k, l, |a, b| {
        (a.re * b.re + a.im * b.im) * half
    })?;
    jackknife_mean(&v)
}

/// `E[Re A~(s,k) Im A~(t,k)]`.
pub fn re_im_covariance<T: Scalar>(
    ensemble: &[CoefficientProcess<T>],
    s: T,
    t: T,
    k: usize,
) -> Result<Estimate<T>> {
    let v = paired_products(ensemble, s, t, k, k, |a, b| a.re * b.im)?;
    jackknife_mean(&v)
}

/// Median of a non-empty slice.
pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) * T::lit(0.5)
    })
}
