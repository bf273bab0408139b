//! Basic particle maps: univalent maps of `{|z| > 1}` into itself fixing
//! infinity, with `F(z)/z -> e^c`.
//!
//! Two shape families are provided.
//!
//! * **Slit**: a radial slit `[1, t]` attached at `z = 1`, built as the
//!   Joukowski conjugation `F = h^{-1}(e^c h(.))` with `h(z) = z + 1/z + 2`.
//!   Capacity is exact by construction.
//! * **Spread-out**: `F(z) = e^c z exp(2c / (gamma z - 1))`, univalent iff
//!   `|gamma| >= 1 + c + sqrt(2c + c^2)`.
//!
//! Any map may be rotated, `F_theta(z) = e^{i theta} F(e^{-i theta} z)`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{AleError, Result};
use crate::scalar::Scalar;

/// Modulus at which asymptotic quantities (capacity, branch anchor) are read.
pub const ASYMPTOTIC_RADIUS: f64 = 1.0e6;

/// Points with `|z| < 1 - DOMAIN_SLACK` are rejected. The unit circle itself is
/// accepted and evaluated through the continuous boundary extension.
const DOMAIN_SLACK: f64 = 1.0e-12;

/// Nodes on the read-off circle used by [`ParticleMap::capacity`].
const CAPACITY_NODES: usize = 64;

/// Slit derivatives are refused when the image lies this close to the base.
const SINGULAR_RADIUS: f64 = 1.0e-7;

/// Radial unwrapping ratio for the slit logarithm branch.
const UNWRAP_RATIO: f64 = 0.9;

/// DFT radius and node count for the constant Laurent coefficient.
const BETA_RADIUS: f64 = 2.0;
const BETA_NODES: usize = 4096;

/// Threshold `gamma(c) = 1 + c + sqrt(2c + c^2)` for spread-out univalence.
pub fn spreadout_gamma_threshold<T: Scalar>(c: T) -> T {
    T::one() + c + (T::lit(2.0) * c + c * c).sqrt()
}

/// Regularity constant `2|gamma - 1| / sqrt(c)` of the spread-out family.
pub fn spreadout_regularity_bound<T: Scalar>(c: T, gamma: Complex<T>) -> T {
    T::lit(2.0) * (gamma - T::one()).norm() / c.sqrt()
}

/// Capacity of the slit whose tip sits at modulus `1 + delta`.
pub fn slit_capacity_for_tip<T: Scalar>(delta: T) -> T {
    (T::one() + delta * delta / (T::lit(4.0) * (T::one() + delta))).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum ParticleShape<T> {
    /// Radial slit; `tip` is the modulus of the slit tip.
    Slit { tip: T },
    /// Spread-out particle with complex shape parameter.
    SpreadOut { gamma: Complex<T> },
}

/// A basic map of logarithmic capacity `c`, optionally rotated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleMap<T> {
    shape: ParticleShape<T>,
    c: T,
    exp_c: T,
    /// `e^{i theta}`; the identity rotation is `1`.
    rotation: Complex<T>,
}

impl<T: Scalar> ParticleMap<T> {
    /// Slit particle of capacity `c`.
    pub fn slit(c: T) -> Result<Self> {
        check_capacity(c)?;
        let exp_c = c.exp();
        let tip = slit_inverse(Complex::new(T::lit(4.0) * exp_c, T::zero())).re;
        Ok(Self {
            shape: ParticleShape::Slit { tip },
            c,
            exp_c,
            rotation: Complex::new(T::one(), T::zero()),
        })
    }

    /// Spread-out particle `F_{c, gamma}`.
    pub fn spread_out(c: T, gamma: Complex<T>) -> Result<Self> {
        check_capacity(c)?;
        if !(gamma.re.is_finite() && gamma.im.is_finite()) {
            return Err(AleError::InvalidParameter(format!(
                "gamma must be finite, got {gamma}"
            )));
        }
        let threshold = spreadout_gamma_threshold(c);
        let modulus = gamma.norm();
        if modulus < threshold {
            return Err(AleError::UnivalenceViolation {
                modulus: modulus.to_f64_lossy(),
                threshold: threshold.to_f64_lossy(),
                capacity: c.to_f64_lossy(),
            });
        }
        Ok(Self {
            shape: ParticleShape::SpreadOut { gamma },
            c,
            exp_c: c.exp(),
            rotation: Complex::new(T::one(), T::zero()),
        })
    }

    /// Same shape, re-built at a different capacity (used by the HL(alpha)
    /// capacity rule). Spread-out maps keep their `gamma` and must remain
    /// univalent at the new capacity.
    pub fn with_capacity(&self, c: T) -> Result<Self> {
        let base = match self.shape {
            ParticleShape::Slit { .. } => Self::slit(c)?,
            ParticleShape::SpreadOut { gamma } => Self::spread_out(c, gamma)?,
        };
        Ok(Self {
            rotation: self.rotation,
            ..base
        })
    }

    /// `e^{i theta} F(e^{-i theta} z)`, composed with any existing rotation.
    pub fn rotated(&self, theta: T) -> Self {
        let r = Complex::from_polar(T::one(), theta);
        Self {
            rotation: self.rotation * r,
            ..*self
        }
    }

    /// Same map with the rotation removed.
    pub fn unrotated(&self) -> Self {
        Self {
            rotation: Complex::new(T::one(), T::zero()),
            ..*self
        }
    }

    pub fn shape(&self) -> ParticleShape<T> {
        self.shape
    }

    /// The construction parameter `c`.
    pub fn c(&self) -> T {
        self.c
    }

    pub fn rotation(&self) -> Complex<T> {
        self.rotation
    }

    /// Evaluates `F(z)`.
    pub fn eval(&self, z: Complex<T>) -> Result<Complex<T>> {
        check_domain(z)?;
        Ok(self.eval_unchecked(z))
    }

    /// Evaluates `F'(z)`.
    pub fn deriv(&self, z: Complex<T>) -> Result<Complex<T>> {
        check_domain(z)?;
        let (_, d) = self.eval_with_deriv_unchecked(z);
        if !(d.re.is_finite() && d.im.is_finite()) {
            return Err(singular(z));
        }
        if let ParticleShape::Slit { .. } = self.shape {
            let u = self.base_value(self.rotation.conj() * z);
            // u = 1 is the slit base; F' blows up like |u - 1|^{-1} there.
            if (u - T::one()).norm() < T::lit(SINGULAR_RADIUS) {
                return Err(singular(z));
            }
        }
        Ok(d)
    }

    /// `F(z)` without the domain check. The caller guarantees `|z| >= 1`.
    #[inline]
    pub fn eval_unchecked(&self, z: Complex<T>) -> Complex<T> {
        self.rotation * self.base_value(self.rotation.conj() * z)
    }

    /// `(F(z), F'(z))` without the domain check.
    #[inline]
    pub fn eval_with_deriv_unchecked(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        let zeta = self.rotation.conj() * z;
        let (f, d) = self.base_value_deriv(zeta);
        (self.rotation * f, d)
    }

    #[inline]
    fn base_value(&self, zeta: Complex<T>) -> Complex<T> {
        match self.shape {
            ParticleShape::Slit { .. } => {
                let one = T::one();
                let zp1 = zeta + one;
                let w = zp1 * zp1 / zeta * self.exp_c;
                slit_inverse(w)
            }
            ParticleShape::SpreadOut { gamma } => {
                let q = (gamma * zeta - T::one()).inv();
                (q * (self.c + self.c)).exp() * zeta * self.exp_c
            }
        }
    }

    #[inline]
    fn base_value_deriv(&self, zeta: Complex<T>) -> (Complex<T>, Complex<T>) {
        let one = T::one();
        match self.shape {
            ParticleShape::Slit { .. } => {
                let zp1 = zeta + one;
                let zm1 = zeta - one;
                let w = zp1 * zp1 / zeta * self.exp_c;
                let (u, up1_twice, um1_twice) = slit_inverse_parts(w);
                if zp1.re == T::zero() && zp1.im == T::zero() {
                    // h'(-1) = 0 and F(-1) = -1: the quotient tends to e^{c/2}.
                    return (u, Complex::new((self.c / T::lit(2.0)).exp(), T::zero()));
                }
                // F' = e^c h'(zeta) / h'(u) with h'(x) = (x - 1)(x + 1) / x^2,
                // written with u + 1 and u - 1 taken from the root formula so
                // neither factor suffers cancellation.
                let four = T::lit(4.0);
                let num = zm1 * zp1 * u * u * four;
                let den = zeta * zeta * um1_twice * up1_twice;
                (u, num / den * self.exp_c)
            }
            ParticleShape::SpreadOut { gamma } => {
                let q = (gamma * zeta - one).inv();
                let e = (q * (self.c + self.c)).exp() * self.exp_c;
                let f = e * zeta;
                let two_c = self.c + self.c;
                let d = e * (Complex::new(one, T::zero()) - gamma * zeta * q * q * two_c);
                (f, d)
            }
        }
    }

    /// Continuous branch of `log(F(z)/z)` with limit `c` at infinity.
    pub fn log_ratio(&self, z: Complex<T>) -> Result<Complex<T>> {
        check_domain(z)?;
        Ok(self.log_ratio_unchecked(z))
    }

    fn log_ratio_unchecked(&self, z: Complex<T>) -> Complex<T> {
        // log(F_theta(z) / z) = log(F(zeta) / zeta) with zeta = e^{-i theta} z.
        let zeta = self.rotation.conj() * z;
        match self.shape {
            ParticleShape::SpreadOut { gamma } => {
                let one = T::one();
                (gamma * zeta + one) / (gamma * zeta - one) * self.c
            }
            ParticleShape::Slit { .. } => {
                let r = zeta.norm();
                let dir = zeta / r;
                let anchor = T::lit(ASYMPTOTIC_RADIUS).max(r);
                let ratio_at = |x: Complex<T>| self.base_value(x) / x;
                let mut prev = ratio_at(dir * anchor);
                let mut acc = prev.ln();
                let mut rho = anchor;
                let step = T::lit(UNWRAP_RATIO);
                while rho > r {
                    rho = (rho * step).max(r);
                    let point = if rho == r { zeta } else { dir * rho };
                    let next = ratio_at(point);
                    acc += (next / prev).ln();
                    prev = next;
                }
                acc
            }
        }
    }

    /// Logarithmic capacity read off asymptotically: the mean of
    /// `Re log(F(z)/z)` over a circle of modulus `10^6`.
    ///
    /// Averaging over the circle cancels the `O(1/|z|)` terms of a single
    /// point read-off.
    pub fn capacity(&self) -> T {
        let r = T::lit(ASYMPTOTIC_RADIUS);
        let n = T::from_usize_lossy(CAPACITY_NODES);
        let sum: T = (0..CAPACITY_NODES)
            .map(|m| {
                let theta = T::TAU() * T::from_usize_lossy(m) / n;
                self.log_ratio_unchecked(Complex::from_polar(r, theta)).re
            })
            .sum();
        sum / n
    }

    /// Estimates the regularity constant of the unrotated map on `grid`.
    pub fn regularity_estimate(&self, grid: &GridSpec<T>) -> Result<RegularityReport<T>> {
        grid.validate()?;
        let base = self.unrotated();
        let one = T::one();
        let c32 = self.c * self.c.sqrt();
        let mut best = T::zero();
        let mut worst = Complex::new(T::zero(), T::zero());
        for &r in &grid.radii {
            for j in 0..grid.angles {
                let theta = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(grid.angles);
                let z = Complex::from_polar(r, theta);
                let kernel = (z + one) / (z - one) * self.c;
                let defect = (base.log_ratio_unchecked(z) - kernel).norm();
                let scale = (z - one).norm() * (r - one) / (c32 * r);
                let value = defect * scale;
                if !value.is_finite() {
                    return Err(AleError::InvalidParameter(format!(
                        "non-finite regularity defect at {z}"
                    )));
                }
                if value > best {
                    best = value;
                    worst = z;
                }
            }
        }
        Ok(RegularityReport {
            lambda_hat: best,
            grid: grid.clone(),
            worst_point_re: worst.re,
            worst_point_im: worst.im,
        })
    }

    /// `beta = a_0 / (2c)`, where `a_0` is the constant Laurent coefficient
    /// of `e^{-c} F(z) - z` for the unrotated map.
    pub fn beta_coefficient(&self) -> Complex<T> {
        let base = self.unrotated();
        let r = T::lit(BETA_RADIUS);
        let n = T::from_usize_lossy(BETA_NODES);
        let inv_exp_c = (-self.c).exp();
        let mut sum = Complex::new(T::zero(), T::zero());
        for m in 0..BETA_NODES {
            let z = Complex::from_polar(r, T::TAU() * T::from_usize_lossy(m) / n);
            sum += base.eval_unchecked(z) * inv_exp_c - z;
        }
        sum / n / (self.c + self.c)
    }
}

/// Sampling grid for [`ParticleMap::regularity_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GridSpec<T> {
    pub radii: Vec<T>,
    pub angles: usize,
}

impl<T: Scalar> GridSpec<T> {
    /// Radii `1 + 2^{-m}` for `m = 0..=max_exponent`, with `angles` uniform
    /// angles starting at 0.
    pub fn geometric(max_exponent: u32, angles: usize) -> Self {
        Self::two_sided(max_exponent, 0, angles)
    }

    /// Radii `1 + 2^{m}` for `m = -inner..=outer`. The outer radii matter for
    /// particles whose defect peaks at infinity (spread-out maps).
    pub fn two_sided(inner: u32, outer: u32, angles: usize) -> Self {
        let radii = (-(inner as i32)..=outer as i32)
            .rev()
            .map(|m| T::one() + T::lit(2.0).powi(m))
            .collect();
        Self { radii, angles }
    }

    fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.angles == 0 {
            return Err(AleError::InvalidParameter("empty regularity grid".into()));
        }
        if let Some(r) = self
            .radii
            .iter()
            .find(|r| !(**r > T::one()) || !r.is_finite())
        {
            return Err(AleError::InvalidParameter(format!(
                "grid radius {r} is not in (1, inf)"
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for GridSpec<T> {
    fn default() -> Self {
        Self::two_sided(20, 20, 512)
    }
}

/// Outcome of [`ParticleMap::regularity_estimate`]. `lambda_hat` is a grid
/// supremum, reported together with the grid it was taken over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegularityReport<T> {
    pub lambda_hat: T,
    pub grid: GridSpec<T>,
    pub worst_point_re: T,
    pub worst_point_im: T,
}

fn check_capacity<T: Scalar>(c: T) -> Result<()> {
    if !(c > T::zero()) || !c.is_finite() {
        return Err(AleError::InvalidParameter(format!(
            "capacity must be positive and finite, got {c}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn check_domain<T: Scalar>(z: Complex<T>) -> Result<()> {
    let floor = T::one() - T::lit(DOMAIN_SLACK);
    if z.norm_sqr() < floor * floor || !z.re.is_finite() || !z.im.is_finite() {
        return Err(AleError::Domain {
            re: z.re.to_f64_lossy(),
            im: z.im.to_f64_lossy(),
        });
    }
    Ok(())
}

fn singular<T: Scalar>(z: Complex<T>) -> AleError {
    AleError::Singular {
        re: z.re.to_f64_lossy(),
        im: z.im.to_f64_lossy(),
    }
}

/// `h^{-1}(w)` on `C \ [0, 4]`, the root of `u + 1/u = w - 2` with `|u| > 1`.
#[inline]
fn slit_inverse<T: Scalar>(w: Complex<T>) -> Complex<T> {
    slit_inverse_parts(w).0
}

/// Returns `(u, 2(u + 1), 2(u - 1))` for `u = h^{-1}(w)`.
///
/// The two roots `(w - 2 +- s) / 2`, `s = sqrt(w (w - 4))`, have product 1;
/// the exterior one is the root of larger modulus, which fixes the sign of
/// `s` without reference to a cut.
#[inline]
fn slit_inverse_parts<T: Scalar>(w: Complex<T>) -> (Complex<T>, Complex<T>, Complex<T>) {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let s = (w * (w - four)).sqrt();
    let a = w - two;
    let plus = a + s;
    let minus = a - s;
    let s = if plus.norm_sqr() >= minus.norm_sqr() {
        s
    } else {
        -s
    };
    let twice_u = a + s;
    (twice_u / two, w + s, w - four + s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn central_difference(f: &ParticleMap<f64>, z: Complex64, h: f64) -> Complex64 {
        let fp = f.eval(z + h).unwrap();
        let fm = f.eval(z - h).unwrap();
        (fp - fm) / (2.0 * h)
    }

    #[test]
    fn slit_fixes_minus_one() {
        let f = ParticleMap::slit(0.002_270_15).unwrap();
        let w = f.eval(c64(-1.0, 0.0)).unwrap();
        assert!((w - c64(-1.0, 0.0)).norm() < 1e-12, "{w}");
    }

    #[test]
    fn slit_capacity_matches_tip_formula() {
        for delta in [0.5_f64, 0.1, 0.01] {
            let c = slit_capacity_for_tip(delta);
            let f = ParticleMap::slit(c).unwrap();
            match f.shape() {
                ParticleShape::Slit { tip } => {
                    // independent route: t + 1/t + 2 = 4 e^c
                    assert!((tip + 1.0 / tip + 2.0 - 4.0 * c.exp()).abs() < 1e-12);
                    assert!((tip - (1.0 + delta)).abs() < 1e-10, "{tip} vs {delta}");
                }
                _ => unreachable!(),
            }
            assert!((f.capacity() - c).abs() < 1e-8);
        }
        let c = slit_capacity_for_tip(0.1_f64);
        assert!((c - 0.002_270_15).abs() < 1e-8);
        assert!((c / 0.01 - 0.2270).abs() < 1e-4);
    }

    #[test]
    fn slit_derivative_at_minus_one() {
        // Finite-difference oracle along the circle |z| = 1 is unavailable
        // (the map is only defined outside), so step radially outward.
        let c: f64 = 0.002_270_15;
        let f = ParticleMap::slit(c).unwrap();
        let d = f.deriv(c64(-1.0, 0.0)).unwrap();
        let h = 1e-6;
        let z0 = c64(-1.0 - h, 0.0);
        let z1 = c64(-1.0 - 2.0 * h, 0.0);
        // one-sided second-order difference at z = -1
        let fd = (-3.0 * f.eval(c64(-1.0, 0.0)).unwrap() + 4.0 * f.eval(z0).unwrap()
            - f.eval(z1).unwrap())
            / (-2.0 * h);
        assert!((d - fd).norm() < 1e-6, "{d} vs {fd}");
        assert!((d.re - (c / 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn slit_tip_is_image_of_one() {
        let f = ParticleMap::slit(0.01).unwrap();
        let ParticleShape::Slit { tip } = f.shape() else {
            unreachable!()
        };
        let w = f.eval(c64(1.0, 0.0)).unwrap();
        assert!((w - c64(tip, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn spreadout_threshold_value() {
        let g = spreadout_gamma_threshold(0.02_f64);
        assert!((g - (1.02 + 0.0404_f64.sqrt())).abs() < 1e-15);
        assert!((g - 1.22100).abs() < 1e-5);
    }

    #[test]
    fn spreadout_rejects_small_gamma() {
        let err = ParticleMap::spread_out(0.02, c64(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, AleError::UnivalenceViolation { .. }));
        assert!(ParticleMap::spread_out(0.02, c64(1.221, 0.0)).is_ok());
    }

    #[test]
    fn spreadout_closed_form_value() {
        let f = ParticleMap::spread_out(0.02, c64(1.3, 0.0)).unwrap();
        let w = f.eval(c64(2.0, 0.0)).unwrap();
        let expected = 2.0 * (0.045_f64).exp();
        assert!((w - c64(expected, 0.0)).norm() < 1e-12);
        assert!((expected - 2.09205).abs() < 1e-5);
    }

    #[test]
    fn spreadout_large_gamma_is_scaling() {
        let f = ParticleMap::spread_out(0.05, c64(1e12, 0.0)).unwrap();
        let z = c64(1.3, -0.7);
        assert!((f.eval(z).unwrap() - z * 0.05_f64.exp()).norm() < 1e-10);
    }

    #[test]
    fn spreadout_derivative_matches_finite_difference() {
        let f = ParticleMap::spread_out(0.02, c64(1.3, 0.0)).unwrap();
        let z = c64(2.0, 0.0);
        let d = f.deriv(z).unwrap();
        let fd = central_difference(&f, z, 1e-6);
        assert!((d - fd).norm() / d.norm() < 1e-6);
        let closed =
            f.eval(z).unwrap() * (1.0 / z - 2.0 * 0.02 * 1.3 / ((1.3 * z - 1.0) * (1.3 * z - 1.0)));
        assert!((d - closed).norm() < 1e-12);
    }

    #[test]
    fn derivative_at_infinity_is_exp_c() {
        for f in [
            ParticleMap::slit(0.03).unwrap(),
            ParticleMap::spread_out(0.03, c64(1.4, 0.2)).unwrap(),
        ] {
            let d = f.deriv(c64(1e6, 0.0)).unwrap();
            assert!((d - c64(0.03_f64.exp(), 0.0)).norm() < 1e-9);
            let big = c64(1e6, 0.0);
            assert!((f.eval(big).unwrap() / big - 0.03_f64.exp()).norm() < 1e-6);
        }
    }

    #[test]
    fn spreadout_log_ratio_exact() {
        let gamma = c64(1.5, 0.3);
        let f = ParticleMap::spread_out(0.04, gamma).unwrap();
        let z = c64(1.2, 0.9);
        let lr = f.log_ratio(z).unwrap();
        let expected = 0.04 + 2.0 * 0.04 / (gamma * z - 1.0);
        assert!((lr - expected).norm() < 1e-14);
        let direct = (f.eval(z).unwrap() / z).ln();
        assert!((lr - direct).norm() < 1e-12);
    }

    #[test]
    fn slit_log_ratio_at_minus_one_and_infinity() {
        let f = ParticleMap::slit(0.002_270_15).unwrap();
        let lr = f.log_ratio(c64(-1.0, 0.0)).unwrap();
        assert!(lr.norm() < 1e-9, "{lr}");
        let far = f.log_ratio(c64(1e6, 0.0)).unwrap();
        assert!((far - 0.002_270_15).norm() < 1e-6);
    }

    #[test]
    fn capacities_read_off() {
        let f = ParticleMap::spread_out(0.02, c64(1.3, 0.0)).unwrap();
        assert!((f.capacity() - 0.02_f64).abs() < 1e-8);
        let s = ParticleMap::slit(0.002_270_15_f64).unwrap();
        assert!((s.capacity() - 0.002_270_15_f64).abs() < 1e-8);
    }

    #[test]
    fn rotation_preserves_capacity() {
        for f in [
            ParticleMap::slit(0.07).unwrap(),
            ParticleMap::spread_out(0.07, c64(1.6, 0.0)).unwrap(),
        ] {
            let g = f.rotated(1.234);
            assert!((g.capacity() - f.capacity()).abs() < 1e-10);
            let z = c64(0.3, 1.9);
            let rot = Complex64::from_polar(1.0, 1.234);
            let lhs = g.eval(z).unwrap();
            let rhs = rot * f.eval(rot.conj() * z).unwrap();
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn inside_disk_is_rejected() {
        let f = ParticleMap::slit(0.01).unwrap();
        assert!(matches!(
            f.eval(c64(0.5, 0.0)),
            Err(AleError::Domain { .. })
        ));
        assert!(matches!(
            f.deriv(c64(0.0, 0.9)),
            Err(AleError::Domain { .. })
        ));
        assert!(ParticleMap::<f64>::slit(0.0).is_err());
        assert!(ParticleMap::<f64>::slit(-1.0).is_err());
    }

    #[test]
    fn slit_derivative_singular_at_base_preimage() {
        let c: f64 = 0.01;
        let f = ParticleMap::slit(c).unwrap();
        // base preimages: 2 + 2 cos(theta0) = 4 e^{-c}
        let theta0 = (2.0 * (-c).exp() - 1.0).acos();
        let z = Complex64::from_polar(1.0, theta0);
        assert!(matches!(f.deriv(z), Err(AleError::Singular { .. })));
    }

    #[test]
    fn empty_grid_rejected() {
        let f = ParticleMap::slit(0.01).unwrap();
        let grid = GridSpec::<f64> {
            radii: vec![],
            angles: 16,
        };
        assert!(f.regularity_estimate(&grid).is_err());
    }

    #[test]
    fn spreadout_beta_is_inverse_gamma() {
        // z (exp(2c/(gamma z - 1)) - 1) has constant term 2c/gamma exactly.
        let f = ParticleMap::spread_out(0.01, c64(1.5, 0.0)).unwrap();
        let beta = f.beta_coefficient();
        assert!((beta - c64(1.0 / 1.5, 0.0)).norm() < 1e-10);
        assert!((beta.re - 0.6667).abs() < 0.01);
    }

    #[test]
    fn slit_beta_tends_to_one() {
        let f = ParticleMap::slit(1e-4).unwrap();
        let beta = f.beta_coefficient();
        // 2 - 2e^{-c} is the constant term of the Joukowski slit expansion
        let expected = (1.0 - (-1e-4_f64).exp()) / 1e-4;
        assert!((beta.re - expected).abs() < 1e-8, "{beta}");
        assert!((beta - 1.0).norm() < 0.1);
    }

    #[test]
    fn regularity_json_fields() {
        let f = ParticleMap::spread_out(0.02, c64(1.3, 0.0)).unwrap();
        let rep = f.regularity_estimate(&GridSpec::geometric(4, 32)).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        for key in ["lambda_hat", "grid", "worst_point_re", "worst_point_im"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn works_in_single_precision() {
        let f = ParticleMap::<f32>::spread_out(0.02, Complex::new(1.3, 0.0)).unwrap();
        let w = f.eval(Complex::new(2.0, 0.0)).unwrap();
        assert!((w.re - 2.092_05).abs() < 1e-4);
        let s = ParticleMap::<f32>::slit(0.01).unwrap();
        assert!((s.capacity() - 0.01).abs() < 1e-5);
    }
}
