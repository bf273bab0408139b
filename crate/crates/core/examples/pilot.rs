//! Pilot ensembles that freeze the empirical bands used by the statistical
//! tests. Writes `tests/data/pilot.json`:
//!
//!     cargo run --release -p ale-core --example pilot

use ale_core::diagnostics::{circle_norm, disk_deviation, drift_residual, median, NormSpec};
use ale_core::growth::{derive_seed, run, steps_at, ModelParams};
use ale_core::spectral::fluctuation_field;
use ale_core::Complex64;
use serde_json::json;

const PILOT_MASTER: u64 = 0x9117_0000;
const RUNS: u64 = 50;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean `|A_n(z) - leading order|` over 8 snapshots and 10 probes on `|z| = r`.
pub fn mean_drift_residual(c: f64, r: f64, seeds: &[u64]) -> f64 {
    let p = ModelParams::ale(1.0, c, 1.0);
    let mut total = 0.0;
    let mut count = 0.0;
    for &seed in seeds {
        let s = run(p, seed).unwrap();
        for i in 1..=8 {
            let n = steps_at(i as f64 / 8.0, c);
            for j in 0..10 {
                let z = Complex64::from_polar(r, std::f64::consts::TAU * (j as f64 + 0.5) / 10.0);
                total += drift_residual(&s, n, z, 4096).unwrap();
                count += 1.0;
            }
        }
    }
    total / count
}

fn main() {
    let c = 1e-3;
    let p = ModelParams::hl0(c, 1.0);
    let mut sup_dev = Vec::new();
    let mut field_norm = Vec::new();
    for i in 0..RUNS {
        let s = run(p, derive_seed(PILOT_MASTER, i)).unwrap();
        sup_dev.push(disk_deviation(&s, 1.0, 1.5).unwrap().sup_dev);
        let norm = circle_norm(
            |z| fluctuation_field(&s, 1.0, z).unwrap(),
            &NormSpec::new(2.0, 2.0),
        )
        .unwrap();
        field_norm.push(norm);
    }
    let mut sorted = sup_dev.clone();
    sorted.sort_by(f64::total_cmp);
    let mut norms = field_norm.clone();
    norms.sort_by(f64::total_cmp);

    let seeds: Vec<u64> = (0..8).map(|i| derive_seed(PILOT_MASTER, 100 + i)).collect();
    let r = 1.2;
    let drift: Vec<(f64, f64)> = [1e-2, 1e-3]
        .iter()
        .map(|&c| (c, mean_drift_residual(c, r, &seeds)))
        .collect();
    let exponent = (drift[0].1 / drift[1].1).log10();

    let out = json!({
        "master_seed": PILOT_MASTER,
        "hl0_sup_dev": {
            "c": c, "T": 1.0, "r": 1.5, "runs": RUNS,
            "median": median(&sup_dev).unwrap(),
            "q25": quantile(&sorted, 0.25),
            "q75": quantile(&sorted, 0.75),
        },
        "hl0_field_norm": {
            "c": c, "t": 1.0, "r": 2.0, "runs": RUNS,
            "max": norms[norms.len() - 1],
            "q99": quantile(&norms, 0.99),
        },
        "drift_residual": {
            "eta": 1.0, "r": r, "snapshots": 8, "probes": 10, "seeds": seeds.len(),
            "c": drift.iter().map(|d| d.0).collect::<Vec<_>>(),
            "mean_residual": drift.iter().map(|d| d.1).collect::<Vec<_>>(),
            "exponent": exponent,
        },
    });
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/pilot.json");
    std::fs::write(path, serde_json::to_string_pretty(&out).unwrap() + "\n").unwrap();
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
}
