//! manifest.json for single runs and ensembles.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

impl OutputFile {
    pub fn digest(dir: &Path, name: &str) -> CliResult<Self> {
        Ok(Self {
            name: name.to_string(),
            sha256: sha256_file(&dir.join(name))?,
        })
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Ok,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStatus {
    pub state: RunState,
    /// Failing step (1-based) of an aborted run.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl RunStatus {
    pub fn ok() -> Self {
        Self {
            state: RunState::Ok,
            step: None,
            detail: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.state == RunState::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridChoices {
    /// Nodes of the attachment density grid.
    pub density_grid: usize,
    /// `(nodes, order)` of the log-derivative series, when it was used.
    pub log_deriv_cache: Option<(usize, usize)>,
    /// Nodes of the Laurent extraction DFT.
    pub dft_nodes: usize,
    #[serde(rename = "K")]
    pub order: usize,
    pub extraction_radius: f64,
    pub deviation_radii: Vec<f64>,
    pub norm_nodes: usize,
    pub render_radius: f64,
    pub render_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub run_index: u64,
    pub run_seed: u64,
    pub per_run_seeds: String,
    pub software_version: String,
    /// Resolved configuration, every default filled in.
    pub config: Config,
    pub sigma: f64,
    pub steps_planned: usize,
    pub steps_completed: usize,
    pub status: RunStatus,
    pub outputs: Vec<OutputFile>,
    pub grid_choices: GridChoices,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub index: u64,
    pub dir: String,
    pub run_seed: u64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub per_run_seeds: String,
    pub software_version: String,
    pub config: Config,
    pub runs: Vec<RunEntry>,
    /// Indices of runs that aborted; they are excluded from aggregation.
    pub aborted_runs: Vec<u64>,
    pub outputs: Vec<OutputFile>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
