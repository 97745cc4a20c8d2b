//! Per-configuration dumps, their readers, and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ConfigKey;
use crate::align::{Alignment, TopicId};
use crate::cluster::CumulativeClustering;
use crate::error::PipelineError;
use crate::reduce::TargetDim;
use crate::taxonomy::{Case, Trajectory, TrajectoryRecord};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIGS_DIR: &str = "configs";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const TOPICS: &str = "topics.csv";
pub const TRAJECTORIES: &str = "trajectories.csv";
pub const SUMMARY: &str = "summary.json";

pub(crate) fn output_err(path: &Path, e: impl ToString) -> PipelineError {
    PipelineError::Output {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub(crate) fn create_parent(path: &Path) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
    }
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| output_err(path, e))
}

/// Writes header plus rows; every field is already rendered.
pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), PipelineError> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| output_err(path, e))?;
    w.write_record(header).map_err(|e| output_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| output_err(path, e))?;
    }
    w.flush().map_err(|e| output_err(path, e))
}

pub(crate) fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_assignments(dir: &Path, clustering: &CumulativeClustering, fp: &str) -> Result<(), PipelineError> {
    let mut rows = Vec::new();
    for a in &clustering.windows {
        let params = a.params.fingerprint();
        let algo = a.algorithm().to_string();
        for (id, label) in a.doc_ids.iter().zip(&a.labels) {
            rows.push(vec![
                a.window.to_string(),
                id.clone(),
                label.to_string(),
                algo.clone(),
                params.clone(),
                fp.to_string(),
            ]);
        }
    }
    write_csv(
        &dir.join(ASSIGNMENTS),
        &["window", "doc_id", "label", "algorithm", "params", "fingerprint"],
        &rows,
    )
}

/// First four centroid components at six decimals.
pub fn centroid_fingerprint(c: &[f64]) -> String {
    c.iter().take(4).map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(";")
}

pub fn write_topics(dir: &Path, alignment: &Alignment, fp: &str) -> Result<(), PipelineError> {
    let mut rows = Vec::new();
    for t in alignment.registry.topics() {
        for (w, snap) in &t.history {
            rows.push((
                *w,
                t.id,
                vec![
                    w.to_string(),
                    t.id.to_string(),
                    t.created_window.to_string(),
                    snap.member_count.to_string(),
                    centroid_fingerprint(&snap.centroid),
                    fp.to_string(),
                ],
            ));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    write_csv(
        &dir.join(TOPICS),
        &[
            "window",
            "persistent_topic_id",
            "created_window",
            "member_count",
            "centroid_fingerprint",
            "fingerprint",
        ],
        &rows.into_iter().map(|r| r.2).collect::<Vec<_>>(),
    )
}

const TRAJECTORY_HEADER: [&str; 12] = [
    "doc_id",
    "T_A",
    "T_I",
    "T_T",
    "topic_id",
    "delay",
    "case",
    "model_id",
    "target_dim",
    "algorithm",
    "theta_align",
    "fingerprint",
];

pub fn write_trajectories(
    dir: &Path,
    records: &[TrajectoryRecord],
    key: &ConfigKey,
    fp: &str,
) -> Result<(), PipelineError> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let t = &r.trajectory;
            vec![
                t.doc_id.clone(),
                t.appearance.to_string(),
                fmt_opt(t.integration),
                fmt_opt(t.topic_created),
                fmt_opt(t.topic),
                fmt_opt(r.delay()),
                r.case.to_string(),
                key.model_id.clone(),
                key.target_dim.to_string(),
                key.algorithm.to_string(),
                key.theta_str(),
                fp.to_string(),
            ]
        })
        .collect();
    write_csv(&dir.join(TRAJECTORIES), &TRAJECTORY_HEADER, &rows)
}

/// Reads a trajectory dump back into records.
pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.display().to_string()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| output_err(path, e))?;
    let header = r.headers().map_err(|e| output_err(path, e))?.clone();
    if header.iter().take(7).ne(TRAJECTORY_HEADER.iter().take(7).copied()) {
        return Err(output_err(path, "unexpected trajectory header"));
    }
    let opt = |s: &str| -> Result<Option<usize>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| format!("{s:?}: {e}"))
        }
    };
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| output_err(path, e))?;
        let parse = || -> Result<TrajectoryRecord, String> {
            let appearance = row[1].parse().map_err(|e| format!("T_A: {e}"))?;
            Ok(TrajectoryRecord {
                trajectory: Trajectory {
                    doc_id: row[0].to_string(),
                    appearance,
                    integration: opt(&row[2])?,
                    topic_created: opt(&row[3])?,
                    topic: opt(&row[4])?.map(|t| TopicId(t as u32)),
                },
                case: row[6].parse::<Case>().map_err(|e| e.to_string())?,
            })
        };
        out.push(parse().map_err(|e| output_err(path, format!("row {}: {e}", i + 2)))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigOutcome {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigStatus {
    pub fingerprint: String,
    pub model_id: String,
    pub target_dim: TargetDim,
    pub algorithm: crate::cluster::Algorithm,
    pub theta_align: f64,
    pub status: ConfigOutcome,
    /// Output directory relative to the run root.
    pub dir: Option<String>,
    pub error: Option<String>,
    pub theta_delay: Option<usize>,
    pub theta_delay_source: Option<String>,
}

impl ConfigStatus {
    pub fn key(&self) -> ConfigKey {
        ConfigKey {
            model_id: self.model_id.clone(),
            target_dim: self.target_dim,
            algorithm: self.algorithm,
            theta_align: self.theta_align,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Owning configuration, for per-configuration files.
    pub fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub configurations: Vec<ConfigStatus>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn load(out_dir: &Path) -> Result<Self, PipelineError> {
        let path = out_dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|_| PipelineError::MissingArtifact(path.display().to_string()))?;
        serde_json::from_str(&text).map_err(|e| output_err(&path, e))
    }

    /// Rescans `out_dir` so that every file except the manifest itself is listed.
    pub fn write(out_dir: &Path, seed: u64, configurations: Vec<ConfigStatus>) -> Result<Self, PipelineError> {
        let owners: BTreeMap<&str, &str> = configurations
            .iter()
            .filter_map(|c| c.dir.as_deref().map(|d| (d, c.fingerprint.as_str())))
            .collect();
        let mut artifacts = Vec::new();
        for rel in list_files(out_dir)? {
            if rel == MANIFEST {
                continue;
            }
            let full = out_dir.join(&rel);
            let bytes = fs::read(&full).map_err(|e| output_err(&full, e))?;
            let fingerprint = owners
                .iter()
                .find(|(d, _)| rel.starts_with(&format!("{d}/")))
                .map(|(_, f)| f.to_string());
            artifacts.push(Artifact {
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
                path: rel,
                fingerprint,
            });
        }
        let manifest = Manifest {
            schema_version: crate::config::SCHEMA_VERSION,
            seed,
            configurations,
            artifacts,
        };
        write_json(&out_dir.join(MANIFEST), &manifest)?;
        Ok(manifest)
    }
}

/// All regular files under `root`, as sorted `/`-separated relative paths.
pub fn list_files(root: &Path) -> Result<Vec<String>, PipelineError> {
    fn walk(dir: &Path, prefix: &str, out: &mut Vec<String>) -> Result<(), PipelineError> {
        for entry in fs::read_dir(dir).map_err(|e| output_err(dir, e))? {
            let entry = entry.map_err(|e| output_err(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let rel = if prefix.is_empty() { name } else { format!("{prefix}/{name}") };
            let ft = entry.file_type().map_err(|e| output_err(&entry.path(), e))?;
            if ft.is_dir() {
                walk(&entry.path(), &rel, out)?;
            } else if ft.is_file() {
                out.push(rel);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if root.exists() {
        walk(root, "", &mut out)?;
    }
    out.sort();
    Ok(out)
}

pub(crate) fn remove_if_exists(path: PathBuf) -> Result<(), PipelineError> {
    let res = if path.is_dir() {
        fs::remove_dir_all(&path)
    } else if path.exists() {
        fs::remove_file(&path)
    } else {
        Ok(())
    };
    res.map_err(|e| output_err(&path, e))
}
