use std::f64::consts::TAU;

use ale_core::diagnostics::covariance_estimator;
use ale_core::growth::{derive_seed, run, Attachment, ClusterState, ModelParams, SigmaRule};
use ale_core::particle::ParticleMap;
use ale_core::spectral::{coefficient_process, default_radius, fluctuation_field, laurent_extract};
use ale_core::Complex64;

#[test]
fn spread_out_constant_coefficient_is_two_c_over_gamma() {
    let c = 0.01;
    let gamma = 1.5;
    let f = ParticleMap::spread_out(c, Complex64::new(gamma, 0.0)).unwrap();
    let s = laurent_extract(|z| f.eval(z).unwrap() * (-c).exp() - z, 2.0, 16).unwrap();
    assert!(
        (s.coeffs[0] - 2.0 * c / gamma).norm() < 1e-4,
        "{}",
        s.coeffs[0]
    );
    // the oracle through the particle's own beta coefficient is tighter
    let beta = f.beta_coefficient();
    assert!((s.coeffs[0] - beta * 2.0 * c).norm() < 1e-10);
}

#[test]
fn truncated_series_respects_tail_bound_outside() {
    let f = |z: Complex64| (z - 0.9).inv() + 0.3 * (z + Complex64::new(0.0, 0.95)).powi(-2);
    let r = 1.1;
    let series = laurent_extract(f, r, 24).unwrap();
    for scale in [1.5, 2.0, 4.0] {
        let r_eval = r * scale;
        let bound = series.tail_bound(r_eval);
        for j in 0..64 {
            let z = Complex64::from_polar(r_eval, TAU * j as f64 / 64.0);
            assert!((series.eval(z) - f(z)).norm() <= bound, "r' = {r_eval}");
        }
    }
}

#[test]
fn field_vanishes_at_time_zero_and_settles_at_infinity() {
    let s = run(ModelParams::ale(0.5, 0.01, 1.0), 4).unwrap();
    for theta in [0.0, 2.0] {
        let z = Complex64::from_polar(1.7, theta);
        assert_eq!(
            fluctuation_field(&s, 0.0, z).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }
    let a = fluctuation_field(&s, 1.0, Complex64::new(1e6, 0.0)).unwrap();
    let b = fluctuation_field(&s, 1.0, Complex64::new(1e7, 0.0)).unwrap();
    // the next term decays like 1/|z|
    assert!((a - b).norm() < 1e-5, "{a} vs {b}");
    let series = ale_core::spectral::field_series_at(&s, s.len(), 8, 2.0).unwrap();
    assert!((series.coeffs[0] - b).norm() < 1e-6);
}

#[test]
fn coefficient_process_starts_at_zero() {
    let s = run(ModelParams::hl0(0.01, 1.0), 6).unwrap();
    let p = coefficient_process(&s, &[0.0, 0.5, 1.0], 8, 1.5).unwrap();
    assert!(p.coeffs[0].iter().all(|a| a.norm() == 0.0));
    assert!(p.coeffs[2].iter().any(|a| a.norm() > 0.0));
    assert_eq!(p.steps, vec![0, 50, 100]);
}

#[test]
fn reflected_history_gives_conjugate_coefficients() {
    let c = 0.02;
    let p = ModelParams::hl0(c, 1.0);
    let history: Vec<Attachment<f64>> = [0.3, 2.0, 4.4, 1.1, 5.9]
        .iter()
        .map(|&theta| Attachment { theta, c })
        .collect();
    let mirrored: Vec<Attachment<f64>> = history
        .iter()
        .map(|a| Attachment {
            theta: TAU - a.theta,
            c,
        })
        .collect();
    let a = ClusterState::from_history(p, &history).unwrap();
    let b = ClusterState::from_history(p, &mirrored).unwrap();
    let pa = coefficient_process(&a, &[0.1], 12, 1.5).unwrap();
    let pb = coefficient_process(&b, &[0.1], 12, 1.5).unwrap();
    for (x, y) in pa.coeffs[0].iter().zip(&pb.coeffs[0]) {
        assert!((x - y.conj()).norm() < 1e-12);
    }
    // a history fixed by reflection has real coefficients
    let symmetric: Vec<Attachment<f64>> = [0.0, std::f64::consts::PI, 0.0]
        .iter()
        .map(|&theta| Attachment { theta, c })
        .collect();
    let s = ClusterState::from_history(p, &symmetric).unwrap();
    let ps = coefficient_process(&s, &[0.06], 12, 1.5).unwrap();
    assert!(ps.coeffs[0].iter().all(|a| a.im.abs() < 1e-12));
}

#[test]
fn hl0_field_variance_matches_ou_closed_form() {
    let c = 1e-3;
    let mut p = ModelParams::ale(0.0, c, 1.0);
    p.sigma_rule = SigmaRule::PowerOfC(0.2);
    let r = default_radius(c, p.sigma());
    let ensemble: Vec<_> = (0..200)
        .map(|i| {
            let s = run(p, derive_seed(0xC0FF, i)).unwrap();
            coefficient_process(&s, &[1.0], 4, r).unwrap()
        })
        .collect();
    for (k, want) in [
        (0, 1.0 - (-2.0f64).exp()),
        (1, (1.0 - (-4.0f64).exp()) / 2.0),
    ] {
        let e = covariance_estimator(&ensemble, 1.0, 1.0, k).unwrap();
        assert!(
            e.z_score(want).abs() <= 3.0,
            "k = {k}: {} +- {} vs {want}",
            e.estimate,
            e.stderr
        );
    }
}
