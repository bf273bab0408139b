//! SVG level lines `theta -> Phi_n(rho e^{i theta})`.

use std::fmt::Write as _;

use ale_core::growth::ClusterState;
use ale_core::Complex64;
use serde::{Deserialize, Serialize};

pub const BOUNDARY: &str = "boundary.svg";

/// Points per level line.
pub const RENDER_POINTS: usize = 4096;

/// Level lines drawn in addition to `t = 0`.
pub const RENDER_CURVES: usize = 8;

const CANVAS: f64 = 800.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusPolicy {
    /// `rho = 1 + sqrt(c)/4`.
    QuarterSqrt,
    /// `rho = 1 + sqrt(c)`.
    Sqrt,
    /// `rho = 1 + c^{1/4}`.
    FourthRoot,
}

impl RadiusPolicy {
    pub fn radius(self, c: f64) -> f64 {
        match self {
            RadiusPolicy::QuarterSqrt => 1.0 + c.sqrt() / 4.0,
            RadiusPolicy::Sqrt => 1.0 + c.sqrt(),
            RadiusPolicy::FourthRoot => 1.0 + c.powf(0.25),
        }
    }
}

pub fn level_line(state: &ClusterState<f64>, n: usize, rho: f64, points: usize) -> Vec<Complex64> {
    (0..points)
        .map(|j| {
            let z = Complex64::from_polar(rho, std::f64::consts::TAU * j as f64 / points as f64);
            state.phi_eval_unchecked(n, z)
        })
        .collect()
}

/// Sum of signed exterior angles of the closed polyline.
pub fn total_turning(points: &[Complex64]) -> f64 {
    let m = points.len();
    (0..m)
        .map(|j| {
            let a = points[(j + 1) % m] - points[j];
            let b = points[(j + 2) % m] - points[(j + 1) % m];
            (b / a).arg()
        })
        .sum()
}

/// Winding number of the closed polyline around `origin`.
pub fn winding_number(points: &[Complex64], origin: Complex64) -> f64 {
    let m = points.len();
    let total: f64 = (0..m)
        .map(|j| ((points[(j + 1) % m] - origin) / (points[j] - origin)).arg())
        .sum();
    total / std::f64::consts::TAU
}

fn colour(frac: f64) -> String {
    // dark blue at t = 0 through to orange at t = T
    let from = (38.0, 70.0, 140.0);
    let to = (230.0, 120.0, 30.0);
    let mix = |a: f64, b: f64| (a + (b - a) * frac).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(from.0, to.0), mix(from.1, to.1), mix(from.2, to.2))
}

/// SVG with one polyline per `(t, points)` curve, coloured by `t / horizon`.
pub fn svg(curves: &[(f64, Vec<Complex64>)], horizon: f64) -> String {
    let extent = curves
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.re.abs().max(p.im.abs())))
        .fold(1.0_f64, f64::max)
        * 1.05;
    let scale = CANVAS / (2.0 * extent);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (t, pts) in curves {
        let frac = if horizon > 0.0 { (t / horizon).clamp(0.0, 1.0) } else { 1.0 };
        let _ = write!(
            out,
            r#"<polygon fill="none" stroke="{}" stroke-width="0.8" data-t="{t}" points=""#,
            colour(frac)
        );
        for p in pts {
            let x = CANVAS / 2.0 + p.re * scale;
            let y = CANVAS / 2.0 - p.im * scale;
            let _ = write!(out, "{x:.3},{y:.3} ");
        }
        let _ = writeln!(out, r#""/>"#);
    }
    out.push_str("</svg>\n");
    out
}

/// Render times `i T / RENDER_CURVES`, `i = 0..=RENDER_CURVES`.
pub fn render_times(horizon: f64) -> Vec<f64> {
    (0..=RENDER_CURVES)
        .map(|i| horizon * i as f64 / RENDER_CURVES as f64)
        .collect()
}

/// Level lines at the render times, up to the current length of `state`.
pub fn boundary_svg(state: &ClusterState<f64>, rho: f64) -> String {
    let p = state.params();
    let curves: Vec<(f64, Vec<Complex64>)> = render_times(p.horizon)
        .into_iter()
        .map(|t| {
            let n = ale_core::growth::steps_at(t, p.c).min(state.len());
            (t, level_line(state, n, rho, RENDER_POINTS))
        })
        .collect();
    svg(&curves, p.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ale_core::growth::{run, ModelParams};

    #[test]
    fn empty_cluster_renders_a_circle() {
        let s = run(ModelParams::hl0(0.01, 0.001), 0).unwrap();
        let rho = RadiusPolicy::QuarterSqrt.radius(0.01);
        let line = level_line(&s, 0, rho, 256);
        assert!(line.iter().all(|p| (p.norm() - rho).abs() < 1e-14));
        assert!((total_turning(&line) - std::f64::consts::TAU).abs() < 1e-9);
    }

    #[test]
    fn grown_level_line_is_simple_and_nested() {
        let s = run(ModelParams::hl0(0.01, 1.0), 4).unwrap();
        let rho = RadiusPolicy::QuarterSqrt.radius(0.01);
        let line = level_line(&s, s.len(), rho, RENDER_POINTS);
        assert!((total_turning(&line) - std::f64::consts::TAU).abs() < 1e-3);
        assert!((winding_number(&line, Complex64::new(0.0, 0.0)) - 1.0).abs() < 1e-9);
        let half = level_line(&s, s.len() / 2, rho, RENDER_POINTS);
        let mean = |v: &[Complex64]| v.iter().map(|p| p.norm()).sum::<f64>() / v.len() as f64;
        assert!(mean(&line) > mean(&half));
    }

    #[test]
    fn svg_has_one_polygon_per_curve() {
        let s = run(ModelParams::hl0(0.05, 0.5), 1).unwrap();
        let doc = boundary_svg(&s, 1.05);
        assert_eq!(doc.matches("<polygon").count(), RENDER_CURVES + 1);
        assert!(doc.starts_with("<svg"));
    }
}
