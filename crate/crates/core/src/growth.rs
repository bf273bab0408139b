//! Cluster growth: the history of attachments, the composed map
//! `Phi_n = F_1 o ... o F_n`, the attachment density and the step/run loop.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AleError, Result};
use crate::fourier;
use crate::logderiv::LogDerivCache;
use crate::particle::{check_domain, ParticleMap};
use crate::scalar::Scalar;

/// Minimum density grid size.
pub const MIN_DENSITY_GRID: usize = 4096;

/// `|Phi'|` outside `[HEALTH_FLOOR, HEALTH_CEIL]` aborts a run.
pub const HEALTH_FLOOR: f64 = 1.0e-8;
pub const HEALTH_CEIL: f64 = 1.0e8;

/// Default number of evenly spaced snapshot intervals on `[0, T]`.
pub const DEFAULT_SNAPSHOTS: usize = 32;

/// Intermediate points may dip this far inside the unit circle before the
/// composition is declared broken.
const INTERMEDIATE_SLACK: f64 = 1.0e-9;

/// Absolute spectral tail tolerance for the interpolated `log|Phi'|`.
const DENSITY_TAIL_TOL: f64 = 1.0e-12;
const MIN_COARSE_GRID: usize = 128;

/// How the regularization `sigma` is fixed from the base capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "snake_case")]
pub enum SigmaRule<T> {
    /// `sigma` given directly.
    Fixed(T),
    /// `sigma = c^q`.
    PowerOfC(T),
    /// `e^sigma = 1 + c^q`.
    RadiusPowerOfC(T),
}

impl<T: Scalar> SigmaRule<T> {
    pub fn materialize(&self, c: T) -> T {
        match *self {
            SigmaRule::Fixed(s) => s,
            SigmaRule::PowerOfC(q) => c.powf(q),
            SigmaRule::RadiusPowerOfC(q) => (T::one() + c.powf(q)).ln(),
        }
    }
}

impl<T: Scalar> Default for SigmaRule<T> {
    /// `e^sigma = 1 + c^{1/2 - 0.1}`.
    fn default() -> Self {
        SigmaRule::RadiusPowerOfC(T::lit(0.4))
    }
}

/// Particle family used for every attachment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "type", rename_all = "snake_case")]
pub enum ParticleSpec<T> {
    Slit,
    SpreadOut { gamma: Complex<T> },
}

impl<T: Scalar> ParticleSpec<T> {
    pub fn build(&self, c: T) -> Result<ParticleMap<T>> {
        match *self {
            ParticleSpec::Slit => ParticleMap::slit(c),
            ParticleSpec::SpreadOut { gamma } => ParticleMap::spread_out(c, gamma),
        }
    }
}

/// Parameters of an ALE(alpha, eta) run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelParams<T> {
    pub eta: T,
    pub alpha: T,
    pub c: T,
    pub sigma_rule: SigmaRule<T>,
    pub particle: ParticleSpec<T>,
    /// Horizon in rescaled time; the run makes `floor(T/c)` steps.
    pub horizon: T,
}

impl<T: Scalar> ModelParams<T> {
    /// ALE(eta) with slit particles and the default regularization.
    pub fn ale(eta: T, c: T, horizon: T) -> Self {
        Self {
            eta,
            alpha: T::zero(),
            c,
            sigma_rule: SigmaRule::default(),
            particle: ParticleSpec::Slit,
            horizon,
        }
    }

    /// HL(0): uniform angles, no regularization.
    pub fn hl0(c: T, horizon: T) -> Self {
        Self {
            sigma_rule: SigmaRule::Fixed(T::zero()),
            ..Self::ale(T::zero(), c, horizon)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AleError::InvalidParameter(msg));
        if !(self.c > T::zero() && self.c <= T::one()) {
            return bad(format!("c must lie in (0, 1], got {}", self.c));
        }
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !self.eta.is_finite() || !self.alpha.is_finite() {
            return bad("eta and alpha must be finite".into());
        }
        let sigma = self.sigma();
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return bad(format!("sigma must be non-negative, got {sigma}"));
        }
        self.particle.build(self.c)?;
        Ok(())
    }

    pub fn sigma(&self) -> T {
        self.sigma_rule.materialize(self.c)
    }

    /// Number of steps `n(T) = floor(T/c)`.
    pub fn steps(&self) -> usize {
        steps_at(self.horizon, self.c)
    }

    /// Density grid size `max(4096, 2^ceil(log2(16/sqrt(c))))`.
    pub fn density_grid(&self) -> usize {
        let cells = (T::lit(16.0) / self.c.sqrt()).to_f64_lossy().ceil() as usize;
        cells.next_power_of_two().max(MIN_DENSITY_GRID)
    }
}

/// `n(t) = floor(t/c)`, robust to the quotient landing a few ulps below an
/// integer (e.g. `0.1 / 0.01`).
pub fn steps_at<T: Scalar>(t: T, c: T) -> usize {
    if !(t > T::zero()) {
        return 0;
    }
    let q = t / c;
    let guarded = q * (T::one() + T::lit(4.0) * T::epsilon());
    guarded.floor().to_usize().unwrap_or(usize::MAX)
}

/// Times `k T / count` for `k = 0..=count`.
pub fn snapshot_times<T: Scalar>(horizon: T, count: usize) -> Vec<T> {
    let count = count.max(1);
    (0..=count)
        .map(|k| horizon * T::from_usize_lossy(k) / T::from_usize_lossy(count))
        .collect()
}

/// One attachment: angle `theta_j` in `[0, 2 pi)` and capacity `c_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Attachment<T> {
    pub theta: T,
    pub c: T,
}

/// Product of many complex factors kept as `mantissa * e^{log_scale}`.
#[derive(Debug, Clone, Copy)]
struct ScaledProduct<T> {
    mantissa: Complex<T>,
    log_scale: T,
}

impl<T: Scalar> ScaledProduct<T> {
    #[inline]
    fn one() -> Self {
        Self {
            mantissa: Complex::new(T::one(), T::zero()),
            log_scale: T::zero(),
        }
    }

    #[inline]
    fn mul(&mut self, factor: Complex<T>) {
        self.mantissa = self.mantissa * factor;
        let m2 = self.mantissa.norm_sqr();
        if m2 > T::lit(1.0e100) || (m2 < T::lit(1.0e-100) && m2 > T::zero()) {
            let m = m2.sqrt();
            self.log_scale += m.ln();
            self.mantissa = self.mantissa / m;
        }
    }

    fn value(&self) -> Complex<T> {
        self.mantissa * self.log_scale.exp()
    }

    fn log_abs(&self) -> T {
        self.mantissa.norm().ln() + self.log_scale
    }
}

/// Normalized attachment density on a uniform angle grid, with the
/// trapezoidal cumulative used by [`AngleDensity::sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct AngleDensity<T> {
    weights: Vec<T>,
    normalization: T,
    /// `cumulative[m]` is the mass of cells `0..m`, in units of the grid step.
    cumulative: Vec<T>,
    uniform: bool,
}

impl<T: Scalar> AngleDensity<T> {
    /// The uniform density on `m` nodes.
    pub fn uniform(m: usize) -> Self {
        Self {
            weights: vec![T::one(); m],
            normalization: T::one(),
            cumulative: (0..=m).map(T::from_usize_lossy).collect(),
            uniform: true,
        }
    }

    /// Builds a density from raw non-negative node weights; normalizes by
    /// their mean.
    pub fn from_raw(raw: Vec<T>) -> Result<Self> {
        let m = raw.len();
        if m == 0 {
            return Err(AleError::InvalidParameter("empty density grid".into()));
        }
        if raw.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(AleError::InvalidParameter(
                "density weights must be finite and >= 0".into(),
            ));
        }
        let mean = raw.iter().copied().sum::<T>() / T::from_usize_lossy(m);
        if !(mean > T::zero()) {
            return Err(AleError::InvalidParameter("density has zero mass".into()));
        }
        let weights: Vec<T> = raw.into_iter().map(|w| w / mean).collect();
        let half = T::lit(0.5);
        let mut cumulative = Vec::with_capacity(m + 1);
        let mut acc = T::zero();
        cumulative.push(acc);
        for j in 0..m {
            acc += (weights[j] + weights[(j + 1) % m]) * half;
            cumulative.push(acc);
        }
        Ok(Self {
            weights,
            normalization: mean,
            cumulative,
            uniform: false,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.weights.len()
    }

    /// Normalized weights `h(theta_m)`; their mean is 1.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `Z_n`, the mean of the raw weights.
    pub fn normalization(&self) -> T {
        self.normalization
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Draws an angle by inverting the cumulative of the piecewise-linear
    /// interpolant of the node weights. Consumes exactly one uniform variate.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u = T::sample_unit(rng);
        self.quantile(u)
    }

    /// Inverse CDF at `u` in `[0, 1)`.
    pub fn quantile(&self, u: T) -> T {
        let m = self.weights.len();
        let step = T::TAU() / T::from_usize_lossy(m);
        if self.uniform {
            return T::TAU() * u;
        }
        let total = self.cumulative[m];
        let target = u * total;
        // first boundary strictly above target
        let idx = self.cumulative.partition_point(|&x| x <= target);
        let cell = idx.saturating_sub(1).min(m - 1);
        let rem = (target - self.cumulative[cell]).max(T::zero());
        let a = self.weights[cell];
        let b = self.weights[(cell + 1) % m];
        // mass over [0, x] of a cell of unit width: a x + (b - a) x^2 / 2
        let disc = (a * a + T::lit(2.0) * (b - a) * rem).max(T::zero());
        let denom = a + disc.sqrt();
        let x = if denom > T::zero() {
            (T::lit(2.0) * rem / denom).min(T::one())
        } else {
            T::zero()
        };
        let theta = (T::from_usize_lossy(cell) + x) * step;
        if theta >= T::TAU() {
            theta - T::TAU()
        } else {
            theta
        }
    }
}

/// Growth history and generator state of one cluster.
#[derive(Debug, Clone)]
pub struct ClusterState<T> {
    params: ModelParams<T>,
    sigma: T,
    base: ParticleMap<T>,
    history: Vec<Attachment<T>>,
    maps: Vec<ParticleMap<T>>,
    rng: ChaCha8Rng,
    density_grid: usize,
    /// `log Phi_n'` outside `e^sigma`, kept while it stays resolvable.
    log_deriv: Option<LogDerivCache<T>>,
}

impl<T: Scalar> ClusterState<T> {
    /// Empty cluster (`Phi_0 = id`) seeded from `seed`.
    pub fn new(params: ModelParams<T>, seed: u64) -> Result<Self> {
        params.validate()?;
        let base = params.particle.build(params.c)?;
        let sigma = params.sigma();
        let log_deriv = if params.eta != T::zero() {
            LogDerivCache::identity(sigma.exp())
        } else {
            None
        };
        Ok(Self {
            sigma,
            log_deriv,
            density_grid: params.density_grid(),
            params,
            base,
            history: Vec::new(),
            maps: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Cluster built from a prescribed attachment list (no sampling).
    pub fn from_history(params: ModelParams<T>, history: &[Attachment<T>]) -> Result<Self> {
        let mut state = Self::new(params, 0)?;
        for a in history {
            state.push_attachment(*a)?;
        }
        Ok(state)
    }

    /// Appends a forced attachment.
    pub fn push_attachment(&mut self, a: Attachment<T>) -> Result<()> {
        if !(a.c > T::zero()) || !a.theta.is_finite() {
            return Err(AleError::InvalidParameter(format!(
                "attachment needs finite angle and positive capacity, got ({}, {})",
                a.theta, a.c
            )));
        }
        let particle = if a.c == self.params.c {
            self.base
        } else {
            self.base.with_capacity(a.c)?
        };
        let map = particle.rotated(a.theta);
        if let Some(cache) = &self.log_deriv {
            self.log_deriv = cache.advance(&map);
        }
        self.maps.push(map);
        self.history.push(a);
        Ok(())
    }

    /// Overrides the density grid size (power of two, at least 64).
    pub fn set_density_grid(&mut self, m: usize) -> Result<()> {
        if m < 64 || !m.is_power_of_two() {
            return Err(AleError::InvalidParameter(format!(
                "density grid must be a power of two >= 64, got {m}"
            )));
        }
        self.density_grid = m;
        Ok(())
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn density_grid(&self) -> usize {
        self.density_grid
    }

    pub fn history(&self) -> &[Attachment<T>] {
        &self.history
    }

    /// The rotated particle maps `F_1, ..., F_n`.
    pub fn maps(&self) -> &[ParticleMap<T>] {
        &self.maps
    }

    /// The unrotated basic map at capacity `c`.
    pub fn base_map(&self) -> &ParticleMap<T> {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// `cap(K_n)`: exactly `c n` when `alpha = 0`, else the sum of `c_j`.
    pub fn total_capacity(&self) -> T {
        self.capacity_at(self.len())
    }

    pub fn capacity_at(&self, n: usize) -> T {
        if self.params.alpha == T::zero() {
            self.params.c * T::from_usize_lossy(n)
        } else {
            self.history[..n].iter().map(|a| a.c).sum()
        }
    }

    fn check_prefix(&self, n: usize) -> Result<()> {
        if n > self.len() {
            return Err(AleError::InvalidParameter(format!(
                "prefix {n} exceeds history length {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// `Phi_n(z)`.
    pub fn phi_eval(&self, z: Complex<T>) -> Result<Complex<T>> {
        self.phi_eval_at(self.len(), z)
    }

    /// `Phi_k(z)` for the first `k` attachments.
    pub fn phi_eval_at(&self, k: usize, z: Complex<T>) -> Result<Complex<T>> {
        self.check_prefix(k)?;
        check_domain(z)?;
        let floor = T::one() - T::lit(INTERMEDIATE_SLACK);
        let floor2 = floor * floor;
        let mut w = z;
        for f in self.maps[..k].iter().rev() {
            w = f.eval_unchecked(w);
            if !(w.norm_sqr() >= floor2) {
                return Err(AleError::Domain {
                    re: w.re.to_f64_lossy(),
                    im: w.im.to_f64_lossy(),
                });
            }
        }
        Ok(w)
    }

    /// `Phi_k(z)` without checks; `|z| >= 1` is the caller's responsibility.
    #[inline]
    pub fn phi_eval_unchecked(&self, k: usize, z: Complex<T>) -> Complex<T> {
        self.maps[..k]
            .iter()
            .rev()
            .fold(z, |w, f| f.eval_unchecked(w))
    }

    /// `Phi_n'(z)`.
    pub fn phi_deriv(&self, z: Complex<T>) -> Result<Complex<T>> {
        self.phi_deriv_at(self.len(), z)
    }

    /// `Phi_k'(z)`, accumulated as a rescaled product of `F_j'` at the
    /// intermediate points of the backward composition.
    pub fn phi_deriv_at(&self, k: usize, z: Complex<T>) -> Result<Complex<T>> {
        self.check_prefix(k)?;
        check_domain(z)?;
        let (_, d) = self.compose_with_deriv(k, z);
        let v = d.value();
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(AleError::Singular {
                re: z.re.to_f64_lossy(),
                im: z.im.to_f64_lossy(),
            });
        }
        Ok(v)
    }

    /// `(Phi_k(z), log|Phi_k'(z)|)` without checks.
    #[inline]
    pub fn phi_and_log_abs_deriv(&self, k: usize, z: Complex<T>) -> (Complex<T>, T) {
        let (w, d) = self.compose_with_deriv(k, z);
        (w, d.log_abs())
    }

    /// `(Phi_k(z), Phi_k'(z))` without checks.
    #[inline]
    pub fn phi_and_deriv_unchecked(&self, k: usize, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        let (w, d) = self.compose_with_deriv(k, z);
        (w, d.value())
    }

    #[inline]
    fn compose_with_deriv(&self, k: usize, z: Complex<T>) -> (Complex<T>, ScaledProduct<T>) {
        let mut w = z;
        let mut d = ScaledProduct::one();
        for f in self.maps[..k].iter().rev() {
            let (fw, dw) = f.eval_with_deriv_unchecked(w);
            d.mul(dw);
            w = fw;
        }
        (w, d)
    }

    /// Density `h_{k+1}` of the next attachment given the first `k`
    /// particles, on `m` uniform angles.
    ///
    /// For the current step `log|Phi_k'|` comes from the incremental cache;
    /// otherwise see [`ClusterState::log_abs_deriv_on_circle`].
    pub fn attachment_density_at(&self, k: usize, m: usize) -> Result<AngleDensity<T>> {
        self.check_prefix(k)?;
        if m < 64 || !m.is_power_of_two() {
            return Err(AleError::InvalidParameter(format!(
                "density grid must be a power of two >= 64, got {m}"
            )));
        }
        let eta = self.params.eta;
        if eta == T::zero() || k == 0 {
            return Ok(AngleDensity::uniform(m));
        }
        let cached = match &self.log_deriv {
            Some(cache) if k == self.len() => cache.values_on(m),
            _ => None,
        };
        let log_derivs = match cached {
            Some(values) => {
                self.check_health(k, &values)?;
                values
            }
            None => self.log_abs_deriv_on_circle(k, self.sigma.exp(), m)?,
        };
        let raw: Vec<T> = log_derivs.iter().map(|&l| (-eta * l).exp()).collect();
        AngleDensity::from_raw(raw).map_err(|e| AleError::RunHealth {
            step: k + 1,
            detail: e.to_string(),
        })
    }

    /// Density for the next step on the configured grid.
    pub fn attachment_density(&self) -> Result<AngleDensity<T>> {
        self.attachment_density_at(self.len(), self.density_grid)
    }

    /// Whether the density for the next step comes from the incremental cache.
    pub fn uses_log_deriv_cache(&self) -> bool {
        self.log_deriv.is_some()
    }

    /// Grid size and series order of the incremental cache, if active.
    pub fn log_deriv_cache_shape(&self) -> Option<(usize, usize)> {
        self.log_deriv.as_ref().map(|c| (c.grid(), c.order()))
    }

    /// `Phi_n'` on `m` uniform nodes of `|z| = e^sigma` for the current
    /// step, from the incremental cache when it is active.
    pub fn deriv_on_sigma_circle(&self, m: usize) -> Vec<Complex<T>> {
        match &self.log_deriv {
            Some(cache) => cache
                .complex_values_on(m)
                .into_iter()
                .map(|l| l.exp())
                .collect(),
            None => {
                let r = self.sigma.exp();
                (0..m)
                    .map(|j| {
                        let z = Complex::from_polar(
                            r,
                            T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m),
                        );
                        self.phi_and_deriv_unchecked(self.len(), z).1
                    })
                    .collect()
            }
        }
    }

    fn check_health(&self, k: usize, log_derivs: &[T]) -> Result<()> {
        let lo = T::lit(HEALTH_FLOOR).ln();
        let hi = T::lit(HEALTH_CEIL).ln();
        match log_derivs.iter().position(|l| !(*l >= lo && *l <= hi)) {
            None => Ok(()),
            Some(j) => Err(AleError::RunHealth {
                step: k + 1,
                detail: format!(
                    "|Phi'| = {:e} at node {j} of {} on radius {} is outside [{HEALTH_FLOOR:e}, {HEALTH_CEIL:e}]",
                    log_derivs[j].exp().to_f64_lossy(),
                    log_derivs.len(),
                    self.sigma.exp()
                ),
            }),
        }
    }

    /// `log|Phi_k'(r e^{i theta_m})|` on `m` uniform angles by direct
    /// composition, with the run health check applied to every evaluated node.
    ///
    /// The function is real-analytic in `theta`; it is sampled on the
    /// coarsest power-of-two subgrid whose spectrum is resolved to `1e-12` and
    /// trigonometrically interpolated onto the full grid. If no coarser grid
    /// resolves it, all `m` nodes are evaluated.
    pub fn log_abs_deriv_on_circle(&self, k: usize, radius: T, m: usize) -> Result<Vec<T>> {
        let lo = T::lit(HEALTH_FLOOR).ln();
        let hi = T::lit(HEALTH_CEIL).ln();
        let eval = |count: usize| -> Result<Vec<T>> {
            (0..count)
                .map(|j| {
                    let theta = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(count);
                    let (_, l) = self.phi_and_log_abs_deriv(k, Complex::from_polar(radius, theta));
                    if !(l >= lo && l <= hi) {
                        return Err(AleError::RunHealth {
                            step: k + 1,
                            detail: format!(
                                "|Phi'| = {:e} at angle {theta} on radius {radius} is outside [{HEALTH_FLOOR:e}, {HEALTH_CEIL:e}]",
                                l.exp().to_f64_lossy()
                            ),
                        });
                    }
                    Ok(l)
                })
                .collect()
        };
        let mut coarse = MIN_COARSE_GRID.min(m);
        while coarse < m {
            let samples = eval(coarse)?;
            if let Some(fine) = fourier::spectral_upsample(&samples, m, T::lit(DENSITY_TAIL_TOL)) {
                return Ok(fine);
            }
            coarse *= 2;
        }
        eval(m)
    }

    /// `c_{k+1} = c |Phi_k'(e^{sigma + i theta})|^{-alpha}`.
    pub fn capacity_rule_at(&self, k: usize, theta: T) -> Result<T> {
        self.check_prefix(k)?;
        let alpha = self.params.alpha;
        if alpha == T::zero() || k == 0 {
            return Ok(self.params.c);
        }
        let z = Complex::from_polar(self.sigma.exp(), theta);
        let (_, l) = self.phi_and_log_abs_deriv(k, z);
        let value = self.params.c * (-alpha * l).exp();
        if !value.is_finite()
            || !(l.exp() >= T::lit(HEALTH_FLOOR) && l.exp() <= T::lit(HEALTH_CEIL))
        {
            return Err(AleError::RunHealth {
                step: k + 1,
                detail: format!(
                    "non-finite or out-of-range |Phi'| at capacity rule, theta = {theta}"
                ),
            });
        }
        Ok(value)
    }

    pub fn capacity_rule(&self, theta: T) -> Result<T> {
        self.capacity_rule_at(self.len(), theta)
    }

    /// One growth step: density, angle, capacity, append.
    pub fn step(&mut self) -> Result<Attachment<T>> {
        let density = self.attachment_density()?;
        let theta = density.sample(&mut self.rng);
        let c = self.capacity_rule(theta)?;
        let a = Attachment { theta, c };
        self.push_attachment(a)?;
        Ok(a)
    }

    /// Runs `count` steps, returning the first error.
    pub fn advance(&mut self, count: usize) -> Result<()> {
        for _ in 0..count {
            self.step()?;
        }
        Ok(())
    }

    /// Snapshot step indices `n(t)` at the given times.
    pub fn snapshot_steps(&self, times: &[T]) -> Vec<usize> {
        times
            .iter()
            .map(|&t| steps_at(t, self.params.c).min(self.len()))
            .collect()
    }
}

/// Runs to the horizon, calling `observe(state, t)` once the state holds
/// `n(t)` particles, for each time in `times` (ascending).
pub fn run_with_snapshots<T, F>(
    params: ModelParams<T>,
    seed: u64,
    times: &[T],
    mut observe: F,
) -> Result<ClusterState<T>>
where
    T: Scalar,
    F: FnMut(&ClusterState<T>, T) -> Result<()>,
{
    let mut state = ClusterState::new(params, seed)?;
    let total = params.steps();
    for &t in times {
        let n = steps_at(t, params.c).min(total);
        if n > state.len() {
            state.advance(n - state.len())?;
        }
        observe(&state, t)?;
    }
    if total > state.len() {
        state.advance(total - state.len())?;
    }
    Ok(state)
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` in an ensemble: `splitmix64(master ^ splitmix64(index))`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Identifier of the seed rule above, recorded in manifests.
pub const SEED_RULE: &str = "splitmix64(master ^ splitmix64(index))";

/// Executes `n(T)` steps from an empty cluster seeded with `seed`.
pub fn run<T: Scalar>(params: ModelParams<T>, seed: u64) -> Result<ClusterState<T>> {
    let mut state = ClusterState::new(params, seed)?;
    state.advance(params.steps())?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn hl0(c: f64, t: f64) -> ModelParams<f64> {
        ModelParams::hl0(c, t)
    }

    #[test]
    fn step_counts() {
        assert_eq!(hl0(0.01, 1.0).steps(), 100);
        assert_eq!(hl0(0.01, 0.1).steps(), 10);
        assert_eq!(hl0(1e-3, 1.0).steps(), 1000);
        assert_eq!(hl0(0.3, 0.1).steps(), 0);
        assert_eq!(steps_at(0.0_f64, 0.01), 0);
    }

    #[test]
    fn empty_cluster_is_identity() {
        let s = run(hl0(0.3, 0.1), 1).unwrap();
        assert!(s.is_empty());
        let z = Complex64::new(1.7, -0.2);
        assert_eq!(s.phi_eval(z).unwrap(), z);
        assert_eq!(s.phi_deriv(z).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn single_particle_is_rotated_map() {
        let p = hl0(0.02, 1.0);
        let s = ClusterState::from_history(
            p,
            &[Attachment {
                theta: std::f64::consts::FRAC_PI_2,
                c: 0.02,
            }],
        )
        .unwrap();
        let f = ParticleMap::slit(0.02).unwrap();
        let z = Complex64::new(0.4, 1.3);
        let i = Complex64::new(0.0, 1.0);
        let expected = i * f.eval(-i * z).unwrap();
        assert!((s.phi_eval(z).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn capacity_exact_for_alpha_zero() {
        let s = run(hl0(1e-3, 1.0), 5).unwrap();
        assert_eq!(s.len(), 1000);
        assert_eq!(s.total_capacity(), 1.0);
    }

    #[test]
    fn eta_zero_density_is_uniform() {
        let mut p = ModelParams::ale(0.0, 0.01, 1.0);
        p.sigma_rule = SigmaRule::Fixed(0.1);
        let mut s = ClusterState::new(p, 3).unwrap();
        s.advance(20).unwrap();
        let d = s.attachment_density().unwrap();
        assert!(d.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn first_density_is_uniform_for_any_eta() {
        let s = ClusterState::new(ModelParams::ale(0.8, 0.01, 1.0), 3).unwrap();
        let d = s.attachment_density().unwrap();
        assert!(d.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn density_mean_is_one() {
        let mut s = ClusterState::new(ModelParams::ale(1.0, 0.02, 1.0), 9).unwrap();
        s.advance(30).unwrap();
        let d = s.attachment_density().unwrap();
        let mean: f64 = d.weights().iter().sum::<f64>() / d.grid_size() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(d.normalization() > 0.0);
    }

    #[test]
    fn interpolated_density_matches_direct_evaluation() {
        let mut p = ModelParams::ale(1.0_f64, 0.01, 1.0);
        p.sigma_rule = SigmaRule::PowerOfC(0.2);
        let mut s = ClusterState::new(p, 11).unwrap();
        s.advance(60).unwrap();
        let m = 4096;
        let fast = s
            .log_abs_deriv_on_circle(s.len(), s.sigma().exp(), m)
            .unwrap();
        for j in (0..m).step_by(37) {
            let theta = std::f64::consts::TAU * j as f64 / m as f64;
            let z = Complex64::from_polar(s.sigma().exp(), theta);
            let direct = s.phi_deriv(z).unwrap().norm().ln();
            assert!(
                (fast[j] - direct).abs() < 1e-10,
                "{j}: {} vs {direct}",
                fast[j]
            );
        }
    }

    #[test]
    fn cached_log_derivative_matches_direct_composition() {
        let mut s = ClusterState::new(ModelParams::ale(0.5_f64, 2e-3, 1.0), 21).unwrap();
        s.advance(300).unwrap();
        assert!(s.uses_log_deriv_cache());
        let m = s.density_grid();
        let cached = s.log_deriv.as_ref().unwrap().values_on(m).unwrap();
        let direct = s
            .log_abs_deriv_on_circle(s.len(), s.sigma().exp(), m)
            .unwrap();
        let err = cached
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn snapshots_observe_prefix_lengths() {
        let p = hl0(0.01, 1.0);
        let mut seen = Vec::new();
        let s = run_with_snapshots(p, 3, &snapshot_times(1.0, 4), |st, t| {
            seen.push((t, st.len()));
            Ok(())
        })
        .unwrap();
        assert_eq!(s.len(), 100);
        let lens: Vec<usize> = seen.iter().map(|x| x.1).collect();
        assert_eq!(lens, vec![0, 25, 50, 75, 100]);
        assert_eq!(s.history(), run(p, 3).unwrap().history());
    }

    #[test]
    fn cached_derivative_on_circle_matches_direct() {
        let mut s = ClusterState::new(ModelParams::ale(1.0_f64, 0.01, 1.0), 8).unwrap();
        s.advance(40).unwrap();
        let m = 1024;
        let fast = s.deriv_on_sigma_circle(m);
        for j in (0..m).step_by(31) {
            let z =
                Complex64::from_polar(s.sigma().exp(), std::f64::consts::TAU * j as f64 / m as f64);
            let d = s.phi_deriv(z).unwrap();
            assert!((fast[j] - d).norm() < 1e-9 * d.norm());
        }
    }

    #[test]
    fn density_grid_rule() {
        assert_eq!(hl0(0.01, 1.0).density_grid(), 4096);
        assert_eq!(hl0(1e-6, 1.0).density_grid(), 16384);
    }

    #[test]
    fn quantile_point_mass() {
        let mut raw = vec![0.0; 64];
        raw[10] = 1.0;
        let d = AngleDensity::from_raw(raw).unwrap();
        let step = std::f64::consts::TAU / 64.0;
        for k in 0..200 {
            let theta = d.quantile(k as f64 / 200.0);
            assert!(
                (theta - 10.0 * step).abs() <= step * (1.0 + 1e-12),
                "{theta}"
            );
        }
    }

    #[test]
    fn capacity_rule_arithmetic() {
        let mut p = hl0(0.01, 1.0);
        p.alpha = 2.0;
        let s = ClusterState::new(p, 0).unwrap();
        assert_eq!(s.capacity_rule(0.3).unwrap(), 0.01);
        p.alpha = 0.0;
        let mut s = ClusterState::new(p, 0).unwrap();
        s.advance(5).unwrap();
        assert_eq!(s.capacity_rule(1.0).unwrap(), 0.01);
    }

    #[test]
    fn capacity_rule_with_feedback() {
        let mut p = hl0(0.01, 1.0);
        p.alpha = 2.0;
        let mut s = ClusterState::new(p, 4).unwrap();
        s.advance(5).unwrap();
        let theta = 0.7;
        let z = Complex64::from_polar(s.sigma().exp(), theta);
        let d = s.phi_deriv(z).unwrap().norm();
        let expected = 0.01 / (d * d);
        assert!((s.capacity_rule(theta).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn health_check_fires_on_tiny_sigma() {
        let mut p = ModelParams::ale(1.0_f64, 0.05, 1.0);
        p.sigma_rule = SigmaRule::Fixed(0.0);
        // the tip preimage z = 1 is a critical point of the slit map and a grid node
        let s = ClusterState::from_history(
            p,
            &[Attachment {
                theta: 0.0,
                c: 0.05,
            }],
        )
        .unwrap();
        let err = s.attachment_density().unwrap_err();
        assert!(matches!(err, AleError::RunHealth { .. }), "{err}");
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ClusterState::new(hl0(0.0, 1.0), 0).is_err());
        assert!(ClusterState::new(hl0(1.5, 1.0), 0).is_err());
        assert!(ClusterState::new(hl0(0.1, -1.0), 0).is_err());
        let mut p = hl0(0.02, 1.0);
        p.particle = ParticleSpec::SpreadOut {
            gamma: Complex64::new(1.0, 0.0),
        };
        assert!(matches!(
            ClusterState::new(p, 0),
            Err(AleError::UnivalenceViolation { .. })
        ));
    }
}
