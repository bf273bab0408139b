//! Run configuration (JSON). Unknown keys are rejected; every default is
//! materialized by [`Config::resolve`] and written to the manifest.

use std::path::Path;

use ale_core::growth::{snapshot_times, ModelParams, ParticleSpec, SigmaRule, DEFAULT_SNAPSHOTS};
use ale_core::spectral::DEFAULT_ORDER;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub alpha: f64,
    pub c: f64,
    #[serde(default)]
    pub sigma_rule: SigmaRule<f64>,
    #[serde(default = "slit")]
    pub particle: ParticleSpec<f64>,
}

fn slit() -> ParticleSpec<f64> {
    ParticleSpec::Slit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    /// Number of evenly spaced snapshot intervals on `[0, T]`.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn default_snapshots() -> usize {
    DEFAULT_SNAPSHOTS
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            snapshots: DEFAULT_SNAPSHOTS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "one_usize")]
    pub size: usize,
    #[serde(default = "one_usize")]
    pub parallelism: usize,
}

fn one_usize() -> usize {
    1
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { size: 1, parallelism: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Laurent truncation order for coeffs.csv.
    #[serde(rename = "K", default = "default_order")]
    pub order: usize,
    /// Radii of the deviation records.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// Times entering the covariance report; `null` means `[T/2, T]`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Modes entering the covariance report.
    #[serde(default = "default_modes")]
    pub modes: Vec<usize>,
    /// Coefficient extraction radius; `null` means `max(e^sigma, 1 + 4 sqrt(c))`.
    #[serde(default)]
    pub extraction_radius: Option<f64>,
    /// Also write the OU reference covariance table.
    #[serde(default)]
    pub ou_reference: bool,
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_radii() -> Vec<f64> {
    vec![1.5, 2.0]
}

fn default_modes() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            radii: default_radii(),
            times: None,
            modes: default_modes(),
            extraction_radius: None,
            ou_reference: false,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn model_params(&self) -> ModelParams<f64> {
        ModelParams {
            eta: self.model.eta,
            alpha: self.model.alpha,
            c: self.model.c,
            sigma_rule: self.model.sigma_rule,
            particle: self.model.particle,
            horizon: self.run.horizon,
        }
    }

    /// Validates and fills every optional field.
    pub fn resolve(mut self) -> CliResult<Self> {
        let params = self.model_params();
        params.validate()?;
        let bad = |m: String| Err(CliError::Validation(m));
        if self.run.snapshots == 0 {
            return bad("run.snapshots must be at least 1".into());
        }
        if self.ensemble.size == 0 || self.ensemble.parallelism == 0 {
            return bad("ensemble.size and ensemble.parallelism must be at least 1".into());
        }
        let a = &mut self.analysis;
        if a.order == 0 || a.order > 1024 {
            return bad(format!("analysis.K must lie in 1..=1024, got {}", a.order));
        }
        if a.radii.iter().any(|&r| !(r > 1.0) || !r.is_finite()) {
            return bad("analysis.radii must all exceed 1".into());
        }
        if a.modes.iter().any(|&k| k >= a.order) {
            return bad("analysis.modes must be below K".into());
        }
        let horizon = self.run.horizon;
        let times = a.times.take().unwrap_or_else(|| vec![horizon / 2.0, horizon]);
        if times.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
            return bad(format!("analysis.times must lie in [0, {horizon}]"));
        }
        a.times = Some(times);
        let r = a
            .extraction_radius
            .unwrap_or_else(|| ale_core::spectral::default_radius(params.c, params.sigma()));
        if !(r > 1.0) {
            return bad(format!("analysis.extraction_radius must exceed 1, got {r}"));
        }
        a.extraction_radius = Some(r);
        Ok(self)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        snapshot_times(self.run.horizon, self.run.snapshots)
    }

    pub fn analysis_times(&self) -> Vec<f64> {
        self.analysis
            .times
            .clone()
            .unwrap_or_else(|| vec![self.run.horizon / 2.0, self.run.horizon])
    }

    pub fn extraction_radius(&self) -> f64 {
        let p = self.model_params();
        self.analysis
            .extraction_radius
            .unwrap_or_else(|| ale_core::spectral::default_radius(p.c, p.sigma()))
    }
}

/// SHA-256 of the canonical JSON of the resolved model parameters.
pub fn config_hash(params: &ModelParams<f64>) -> String {
    let text = serde_json::to_string(params).expect("model parameters serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}
