//! Run configuration file (TOML).
//!
//! ```toml
//! schema_version = 1
//! corpus_path = "corpus.jsonl"
//! output_dir = "out"
//! seed = 7
//! target_dims = ["as-provided", 5]
//! algorithms = ["hdbscan", "dbscan"]
//! theta_align_values = [0.3, 0.5]
//! delay_percentile = 0.9
//! delay_scope = "per-run"        # or "pooled"
//! # theta_delay_override = 26
//! # theta_delay_fallback = 26
//!
//! [embeddings]
//! model-a = "emb_a.jsonl"
//!
//! [hdbscan]
//! min_cluster_size = 5
//!
//! [dbscan]
//! eps = 4.0
//! min_pts = 4
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::THETA_SWEEP;
use crate::cluster::{Algorithm, ClusterParams, DbscanParams, HdbscanParams};
use crate::error::ConfigError;
use crate::reduce::{TargetDim, SWEEP_DIMS};
use crate::synth::ScenarioSpec;
use crate::taxonomy::DEFAULT_DELAY_PERCENTILE;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayScope {
    /// each configuration derives its own cutoff
    PerRun,
    /// one cutoff from delays pooled over every configuration
    Pooled,
}

fn default_percentile() -> f64 {
    DEFAULT_DELAY_PERCENTILE
}
fn default_dims() -> Vec<TargetDim> {
    vec![TargetDim::AsProvided]
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Hdbscan]
}
fn default_thetas() -> Vec<f64> {
    vec![0.30]
}
fn default_scope() -> DelayScope {
    DelayScope::PerRun
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub corpus_path: PathBuf,
    pub embeddings: BTreeMap<String, PathBuf>,
    #[serde(default = "default_dims")]
    pub target_dims: Vec<TargetDim>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_thetas")]
    pub theta_align_values: Vec<f64>,
    #[serde(default = "default_percentile")]
    pub delay_percentile: f64,
    #[serde(default = "default_scope")]
    pub delay_scope: DelayScope,
    #[serde(default)]
    pub theta_delay_override: Option<usize>,
    /// Cutoff used when a configuration has no integrated ex-outliers.
    #[serde(default)]
    pub theta_delay_fallback: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub hdbscan: HdbscanParams,
    #[serde(default)]
    pub dbscan: Option<DbscanParams>,
    /// Scenario for the `synth` subcommand.
    #[serde(default)]
    pub synthetic: Option<ScenarioSpec>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<config>"),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, validates and resolves relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { reason, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.output_dir);
        self.embeddings.values_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.embeddings.is_empty() {
            return invalid("at least one embedding model is required".into());
        }
        if self.target_dims.is_empty() || self.algorithms.is_empty() || self.theta_align_values.is_empty() {
            return invalid("target_dims, algorithms and theta_align_values must be non-empty".into());
        }
        for d in &self.target_dims {
            if let TargetDim::Dim(n) = d {
                if !SWEEP_DIMS.contains(n) {
                    return invalid(format!("target dim {n} not in {SWEEP_DIMS:?}"));
                }
            }
        }
        for &t in &self.theta_align_values {
            if !THETA_SWEEP.iter().any(|s| (s - t).abs() < 1e-9) {
                return invalid(format!("theta_align {t} not in {THETA_SWEEP:?}"));
            }
        }
        if !(self.delay_percentile > 0.0 && self.delay_percentile < 1.0) {
            return invalid(format!("delay_percentile {} must lie in (0, 1)", self.delay_percentile));
        }
        if let Some(j) = self.jobs {
            if j == 0 {
                return invalid("jobs must be >= 1".into());
            }
        }
        self.hdbscan
            .validate()
            .or_else(|e| invalid(format!("[hdbscan] {e}")))?;
        if self.algorithms.contains(&Algorithm::Dbscan) {
            match &self.dbscan {
                None => return invalid("dbscan selected but no [dbscan] eps/min_pts given".into()),
                Some(p) => p.validate().or_else(|e| invalid(format!("[dbscan] {e}")))?,
            }
        }
        Ok(())
    }

    pub fn cluster_params(&self, algo: Algorithm) -> ClusterParams {
        match algo {
            Algorithm::Hdbscan => ClusterParams::Hdbscan(self.hdbscan),
            Algorithm::Dbscan => ClusterParams::Dbscan(self.dbscan.expect("validated")),
        }
    }
}
