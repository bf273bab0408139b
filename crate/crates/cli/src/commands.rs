//! The subcommands. Each returns `Ok` only when its exit status is 0.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ale_core::diagnostics::{
    covariance_estimator, cross_mode_covariance, deviation_at_step, median, re_im_covariance, Estimate,
    MIN_ENSEMBLE, NORM_NODES,
};
use ale_core::growth::{derive_seed, steps_at, Attachment, ClusterState, ParticleSpec, SEED_RULE};
use ale_core::ou::{covariance_table, ou_covariance, OuParams};
use ale_core::particle::{spreadout_regularity_bound, GridSpec, ParticleMap};
use ale_core::spectral::{dft_nodes, field_series_at, CoefficientProcess};
use ale_core::{AleError, Complex64};
use serde::Serialize;

use crate::config::{config_hash, Config};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::{
    read_json, write_json, EnsembleManifest, GridChoices, OutputFile, RunEntry, RunManifest, RunState, RunStatus,
    MANIFEST, SOFTWARE_VERSION,
};
use crate::render::{self, RadiusPolicy, RENDER_POINTS};

pub const COVARIANCE_REPORT: &str = "covariance_report.json";
pub const RUNS_DIR: &str = "runs";

/// Relative slack of the beta certification; equality holds at infinity.
pub const BETA_SLACK: f64 = 1.0e-5;

/// Capacity read-off tolerance of the particle certification.
pub const CAPACITY_TOL: f64 = 1.0e-8;

/// Loads and resolves a config, with `seed` overriding `run.seed`.
pub fn load_config(path: &Path, seed: Option<u64>) -> CliResult<Config> {
    let mut cfg = Config::load(path)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    cfg.resolve()
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// Sorted union of the snapshot and analysis times.
fn coefficient_times(cfg: &Config) -> Vec<f64> {
    let mut times = cfg.snapshot_times();
    times.extend(cfg.analysis_times());
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

fn run_id(hash: &str, master: u64, index: u64) -> String {
    format!("{}-{master:016x}-{index:04}", &hash[..12])
}

fn coefficients(state: &ClusterState<f64>, times: &[f64], order: usize, r: f64) -> CliResult<CoefficientProcess<f64>> {
    let c = state.params().c;
    let steps: Vec<usize> = times.iter().map(|&t| steps_at(t, c)).collect();
    let coeffs = steps
        .iter()
        .map(|&n| Ok(field_series_at(state, n, order, r)?.coeffs))
        .collect::<CliResult<_>>()?;
    Ok(CoefficientProcess {
        times: times.to_vec(),
        steps,
        radius: r,
        coeffs,
    })
}

fn deviations(state: &ClusterState<f64>, cfg: &Config) -> CliResult<Vec<ale_core::diagnostics::DeviationRecord<f64>>> {
    let c = state.params().c;
    let mut out = Vec::new();
    for t in cfg.snapshot_times() {
        let n = steps_at(t, c);
        for &r in &cfg.analysis.radii {
            let (sup_dev, norm2_dev) = deviation_at_step(state, n, r)?;
            out.push(ale_core::diagnostics::DeviationRecord { t, r, sup_dev, norm2_dev });
        }
    }
    Ok(out)
}

/// Runs member `index` of the configured ensemble into `dir`.
///
/// A run-health abort is not an error here: the manifest records it and the
/// caller maps it to exit status 1.
pub fn simulate_run(cfg: &Config, index: u64, dir: &Path) -> CliResult<RunManifest> {
    create_dir(dir)?;
    let params = cfg.model_params();
    let hash = config_hash(&params);
    let master = cfg.run.seed;
    let seed = derive_seed(master, index);
    let planned = params.steps();
    let mut state = ClusterState::new(params, seed)?;
    let mut status = RunStatus::ok();
    while state.len() < planned {
        if let Err(e) = state.step() {
            let step = match &e {
                AleError::RunHealth { step, .. } => *step,
                _ => state.len() + 1,
            };
            status = RunStatus {
                state: RunState::Aborted,
                step: Some(step),
                detail: Some(e.to_string()),
            };
            break;
        }
    }

    let rho = RadiusPolicy::QuarterSqrt.radius(params.c);
    let r_ext = cfg.extraction_radius();
    io::write_angles(&dir.join(io::ANGLES), state.history())?;
    let mut names = vec![io::ANGLES];
    if status.is_ok() {
        let records = deviations(&state, cfg)?;
        io::write_deviation(&dir.join(io::DEVIATION), &records)?;
        let process = coefficients(&state, &coefficient_times(cfg), cfg.analysis.order, r_ext)?;
        io::write_coeffs(&dir.join(io::COEFFS), &process)?;
        std::fs::write(dir.join(render::BOUNDARY), render::boundary_svg(&state, rho))?;
        names.extend([io::DEVIATION, io::COEFFS, render::BOUNDARY]);
    }
    let outputs = names
        .into_iter()
        .map(|n| OutputFile::digest(dir, n))
        .collect::<CliResult<_>>()?;

    let manifest = RunManifest {
        run_id: run_id(&hash, master, index),
        config_hash: hash,
        master_seed: master,
        run_index: index,
        run_seed: seed,
        per_run_seeds: SEED_RULE.to_string(),
        software_version: SOFTWARE_VERSION.to_string(),
        config: cfg.clone(),
        sigma: params.sigma(),
        steps_planned: planned,
        steps_completed: state.len(),
        status,
        outputs,
        grid_choices: GridChoices {
            density_grid: state.density_grid(),
            log_deriv_cache: state.log_deriv_cache_shape(),
            dft_nodes: dft_nodes(cfg.analysis.order),
            order: cfg.analysis.order,
            extraction_radius: r_ext,
            deviation_radii: cfg.analysis.radii.clone(),
            norm_nodes: NORM_NODES,
            render_radius: rho,
            render_points: RENDER_POINTS,
        },
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

fn aborted(m: &RunManifest) -> CliError {
    CliError::Runtime(format!(
        "run {} aborted at step {}: {}",
        m.run_id,
        m.status.step.unwrap_or(0),
        m.status.detail.as_deref().unwrap_or("")
    ))
}

pub fn simulate(cfg: &Config, out: &Path) -> CliResult<RunManifest> {
    let m = simulate_run(cfg, 0, out)?;
    if m.status.is_ok() {
        Ok(m)
    } else {
        Err(aborted(&m))
    }
}

/// Regenerates the run described by `manifest` into `out` and checks every
/// output digest.
pub fn replay(manifest: &Path, out: &Path) -> CliResult<RunManifest> {
    let original: RunManifest = read_json(manifest)?;
    let cfg = original.config.clone().resolve()?;
    let fresh = simulate_run(&cfg, original.run_index, out)?;
    let mismatched: Vec<&str> = original
        .outputs
        .iter()
        .filter(|o| !fresh.outputs.contains(o))
        .map(|o| o.name.as_str())
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::Runtime(format!("replay differs in {}", mismatched.join(", "))));
    }
    Ok(fresh)
}

pub fn run_dir_name(index: u64) -> String {
    format!("run-{index:04}")
}

/// Runs the ensemble with `jobs` workers, then aggregates.
pub fn ensemble(cfg: &Config, out: &Path, jobs: Option<usize>) -> CliResult<EnsembleManifest> {
    use rayon::prelude::*;

    create_dir(&out.join(RUNS_DIR))?;
    let jobs = jobs.unwrap_or(cfg.ensemble.parallelism).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let size = cfg.ensemble.size as u64;
    let results: Vec<CliResult<RunManifest>> = pool.install(|| {
        (0..size)
            .into_par_iter()
            .map(|i| simulate_run(cfg, i, &out.join(RUNS_DIR).join(run_dir_name(i))))
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for (i, r) in (0..size).zip(results) {
        let m = r?;
        runs.push(RunEntry {
            index: i,
            dir: format!("{RUNS_DIR}/{}", run_dir_name(i)),
            run_seed: m.run_seed,
            status: m.status,
        });
    }
    let aborted_runs: Vec<u64> = runs.iter().filter(|r| !r.status.is_ok()).map(|r| r.index).collect();
    let outputs = analyze(out)?;
    let manifest = EnsembleManifest {
        config_hash: config_hash(&cfg.model_params()),
        master_seed: cfg.run.seed,
        per_run_seeds: SEED_RULE.to_string(),
        software_version: SOFTWARE_VERSION.to_string(),
        config: cfg.clone(),
        runs,
        aborted_runs,
        outputs,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    if !manifest.aborted_runs.is_empty() {
        return Err(CliError::Runtime(format!(
            "{} of {} runs aborted: {:?}",
            manifest.aborted_runs.len(),
            size,
            manifest.aborted_runs
        )));
    }
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceEntry {
    pub s: f64,
    pub t: f64,
    pub k: usize,
    pub eta: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub reference: f64,
    pub z_score: f64,
}

/// Covariance between two different modes, or between `Re` and `Im` of one
/// mode (`l == k`); the reference is 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullEntry {
    pub s: f64,
    pub t: f64,
    pub k: usize,
    pub l: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub runs: usize,
    pub min_runs: usize,
    pub eta: f64,
    pub extraction_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub entries: Vec<CovarianceEntry>,
    pub cross_mode: Vec<NullEntry>,
    pub re_im: Vec<NullEntry>,
}

/// Run directories of an ensemble, or `dir` itself for a single run.
fn member_dirs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let runs = dir.join(RUNS_DIR);
    if !runs.is_dir() {
        if dir.join(MANIFEST).is_file() {
            return Ok(vec![dir.to_path_buf()]);
        }
        return Err(CliError::Validation(format!("{} holds no runs", dir.display())));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(&runs)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    dirs.retain(|d| d.join(MANIFEST).is_file());
    dirs.sort();
    Ok(dirs)
}

fn null_entry(s: f64, t: f64, k: usize, l: usize, e: Estimate<f64>) -> NullEntry {
    NullEntry {
        s,
        t,
        k,
        l,
        estimate: e.estimate,
        stderr: e.stderr,
        z_score: e.z_score(0.0),
    }
}

pub fn covariance_report(cfg: &Config, ensemble: &[CoefficientProcess<f64>]) -> CliResult<CovarianceReport> {
    let eta = cfg.model.eta;
    let mut report = CovarianceReport {
        runs: ensemble.len(),
        min_runs: MIN_ENSEMBLE,
        eta,
        extraction_radius: cfg.extraction_radius(),
        note: None,
        entries: Vec::new(),
        cross_mode: Vec::new(),
        re_im: Vec::new(),
    };
    if ensemble.len() < MIN_ENSEMBLE {
        report.note = Some(format!(
            "ensemble of {} runs is below the {MIN_ENSEMBLE} needed for covariance estimates",
            ensemble.len()
        ));
        return Ok(report);
    }
    let times = cfg.analysis_times();
    let modes = &cfg.analysis.modes;
    for (i, &s) in times.iter().enumerate() {
        for &t in &times[i..] {
            for (j, &k) in modes.iter().enumerate() {
                let est = covariance_estimator(ensemble, s, t, k)?;
                let reference = ou_covariance(s, t, &OuParams::new(eta, k));
                report.entries.push(CovarianceEntry {
                    s,
                    t,
                    k,
                    eta,
                    estimate: est.estimate,
                    stderr: est.stderr,
                    reference,
                    z_score: est.z_score(reference),
                });
                report.re_im.push(null_entry(s, t, k, k, re_im_covariance(ensemble, s, t, k)?));
                for &l in &modes[j + 1..] {
                    report
                        .cross_mode
                        .push(null_entry(s, t, k, l, cross_mode_covariance(ensemble, s, t, k, l)?));
                }
            }
        }
    }
    Ok(report)
}

/// Medians over runs of each `(t, r)` deviation row, in file order.
pub fn deviation_summary(
    per_run: &[Vec<ale_core::diagnostics::DeviationRecord<f64>>],
) -> Vec<(f64, f64, f64, f64, usize)> {
    let mut groups: BTreeMap<usize, (f64, f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for records in per_run {
        for (i, r) in records.iter().enumerate() {
            let g = groups.entry(i).or_insert((r.t, r.r, Vec::new(), Vec::new()));
            g.2.push(r.sup_dev);
            g.3.push(r.norm2_dev);
        }
    }
    groups
        .into_values()
        .map(|(t, r, sup, norm2)| {
            let n = sup.len();
            (t, r, median(&sup).unwrap_or(f64::NAN), median(&norm2).unwrap_or(f64::NAN), n)
        })
        .collect()
}

/// Aggregates the completed runs under `dir` from their files. Aborted runs
/// are skipped. Returns the aggregate outputs with digests.
pub fn analyze(dir: &Path) -> CliResult<Vec<OutputFile>> {
    let mut cfg: Option<Config> = None;
    let mut processes = Vec::new();
    let mut devs = Vec::new();
    for d in member_dirs(dir)? {
        let m: RunManifest = read_json(&d.join(MANIFEST))?;
        if !m.status.is_ok() {
            continue;
        }
        match &cfg {
            None => cfg = Some(m.config.clone()),
            Some(c) if c.model_params() != m.config.model_params() => {
                return Err(CliError::Validation(format!("{} belongs to a different model", d.display())));
            }
            Some(_) => {}
        }
        processes.push(io::read_coeffs(&d.join(io::COEFFS), m.grid_choices.extraction_radius)?);
        devs.push(io::read_deviation(&d.join(io::DEVIATION))?);
    }
    let cfg = cfg.ok_or_else(|| CliError::Runtime(format!("no completed runs under {}", dir.display())))?;

    let report = covariance_report(&cfg, &processes)?;
    write_json(&dir.join(COVARIANCE_REPORT), &report)?;
    io::write_deviation_summary(&dir.join(io::DEVIATION_SUMMARY), &deviation_summary(&devs))?;
    let mut names = vec![COVARIANCE_REPORT, io::DEVIATION_SUMMARY];
    if cfg.analysis.ou_reference {
        let rows = covariance_table(&cfg.analysis_times(), &cfg.analysis.modes, &[cfg.model.eta]);
        io::write_ou_table(&dir.join(io::OU_REFERENCE), &rows)?;
        names.push(io::OU_REFERENCE);
    }
    names.into_iter().map(|n| OutputFile::digest(dir, n)).collect()
}

/// Re-renders boundary.svg of an existing run at the chosen level-line radius.
pub fn render(run: &Path, policy: RadiusPolicy, out: Option<&Path>) -> CliResult<PathBuf> {
    let manifest_path = run.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(CliError::Validation(format!("no run at {}", run.display())));
    }
    let m: RunManifest = read_json(&manifest_path)?;
    let history: Vec<Attachment<f64>> = io::read_angles(&run.join(io::ANGLES))?;
    let params = m.config.model_params();
    let state = ClusterState::from_history(params, &history)?;
    let target = out.map_or_else(|| run.join(render::BOUNDARY), Path::to_path_buf);
    if let Some(parent) = target.parent() {
        create_dir(parent)?;
    }
    std::fs::write(&target, render::boundary_svg(&state, policy.radius(params.c)))?;
    Ok(target)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleReport {
    #[serde(rename = "type")]
    pub kind: String,
    pub c: f64,
    pub gamma: Option<(f64, f64)>,
    pub univalent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub capacity: Option<f64>,
    pub capacity_ok: bool,
    pub lambda_hat: Option<f64>,
    /// `2|gamma - 1|/sqrt(c)` for spread-out particles.
    pub lambda_bound: Option<f64>,
    pub lambda_ok: bool,
    pub beta: Option<(f64, f64)>,
    pub beta_ok: bool,
    pub certified: bool,
}

pub fn verify_particle(spec: ParticleSpec<f64>, c: f64) -> ParticleReport {
    let (kind, gamma) = match spec {
        ParticleSpec::Slit => ("slit", None),
        ParticleSpec::SpreadOut { gamma } => ("spread_out", Some((gamma.re, gamma.im))),
    };
    let mut report = ParticleReport {
        kind: kind.to_string(),
        c,
        gamma,
        univalent: false,
        error: None,
        capacity: None,
        capacity_ok: false,
        lambda_hat: None,
        lambda_bound: None,
        lambda_ok: false,
        beta: None,
        beta_ok: false,
        certified: false,
    };
    let map: ParticleMap<f64> = match spec.build(c) {
        Ok(m) => m,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.univalent = true;
    let cap = map.capacity();
    report.capacity = Some(cap);
    report.capacity_ok = (cap - c).abs() <= CAPACITY_TOL;
    let reg = match map.regularity_estimate(&GridSpec::default()) {
        Ok(r) => r,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.lambda_hat = Some(reg.lambda_hat);
    report.lambda_bound = gamma.map(|(re, im)| spreadout_regularity_bound(c, Complex64::new(re, im)));
    report.lambda_ok = report
        .lambda_bound
        .is_none_or(|b| reg.lambda_hat <= b * (1.0 + BETA_SLACK));
    let beta = map.beta_coefficient();
    report.beta = Some((beta.re, beta.im));
    report.beta_ok = (beta - 1.0).norm() <= reg.lambda_hat * c.sqrt() / 2.0 * (1.0 + BETA_SLACK) + 1e-10;
    report.certified = report.capacity_ok && report.lambda_ok && report.beta_ok;
    report
}
