//! Density clustering of cumulative windows.
//!
//! Every algorithm works on points ordered by doc_id and returns `-1` for outliers and
//! contiguous cluster ids `0..k` in order of first appearance along that ordering.

mod dbscan;
mod hdbscan;
mod silhouette;

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dbscan::dbscan_labels;
pub use hdbscan::{hdbscan_labels, HdbscanOutput};
pub use silhouette::{silhouette_score, SilhouetteBand};

use crate::corpus::Corpus;
use crate::error::ClusterError;
use crate::reduce::ReducedSet;

pub const OUTLIER: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hdbscan,
    Dbscan,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Hdbscan => "hdbscan",
            Algorithm::Dbscan => "dbscan",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hdbscan" => Ok(Algorithm::Hdbscan),
            "dbscan" => Ok(Algorithm::Dbscan),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

fn default_min_cluster_size() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdbscanParams {
    #[serde(default = "default_min_cluster_size")]
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size`.
    #[serde(default)]
    pub min_samples: Option<usize>,
    #[serde(default)]
    pub allow_single_cluster: bool,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        HdbscanParams {
            min_cluster_size: default_min_cluster_size(),
            min_samples: None,
            allow_single_cluster: false,
        }
    }
}

impl HdbscanParams {
    pub fn min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.min_cluster_size < 2 {
            return Err(ClusterError::InvalidParams(format!(
                "min_cluster_size must be >= 2, got {}",
                self.min_cluster_size
            )));
        }
        if self.min_samples() < 1 {
            return Err(ClusterError::InvalidParams("min_samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(ClusterError::InvalidParams(format!("eps must be positive, got {}", self.eps)));
        }
        if self.min_pts < 2 {
            return Err(ClusterError::InvalidParams(format!(
                "min_pts must be >= 2, got {}",
                self.min_pts
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClusterParams {
    Hdbscan(HdbscanParams),
    Dbscan(DbscanParams),
}

impl ClusterParams {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            ClusterParams::Hdbscan(_) => Algorithm::Hdbscan,
            ClusterParams::Dbscan(_) => Algorithm::Dbscan,
        }
    }

    /// Stable textual form recorded in every output.
    pub fn fingerprint(&self) -> String {
        match self {
            ClusterParams::Hdbscan(p) => format!(
                "hdbscan(min_cluster_size={},min_samples={},allow_single_cluster={})",
                p.min_cluster_size,
                p.min_samples(),
                p.allow_single_cluster
            ),
            ClusterParams::Dbscan(p) => format!("dbscan(eps={},min_pts={})", p.eps, p.min_pts),
        }
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        match self {
            ClusterParams::Hdbscan(p) => p.validate(),
            ClusterParams::Dbscan(p) => p.validate(),
        }
    }

    /// Labels for points already ordered by doc_id.
    pub fn cluster_points(&self, points: &[Vec<f64>]) -> Result<Vec<i32>, ClusterError> {
        if points.is_empty() {
            return Err(ClusterError::Empty);
        }
        self.validate()?;
        Ok(match self {
            ClusterParams::Hdbscan(p) => hdbscan_labels(points, p).labels,
            ClusterParams::Dbscan(p) => dbscan_labels(points, p)?,
        })
    }
}

/// Cluster labels of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub window: usize,
    /// Sorted ascending.
    pub doc_ids: Vec<String>,
    pub labels: Vec<i32>,
    pub params: ClusterParams,
}

impl ClusterAssignment {
    pub fn algorithm(&self) -> Algorithm {
        self.params.algorithm()
    }

    pub fn label_of(&self, doc_id: &str) -> Option<i32> {
        self.doc_ids
            .binary_search_by(|d| d.as_str().cmp(doc_id))
            .ok()
            .map(|i| self.labels[i])
    }

    pub fn num_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    /// Member positions (into `doc_ids`) of each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

/// Renumbers cluster ids to `0..k` by first appearance, keeping `-1`.
pub fn normalize_labels(labels: &[i32]) -> Vec<i32> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l < 0 {
                OUTLIER
            } else {
                let next = map.len() as i32;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Clusters the documents in `doc_ids` (any order) using their reduced vectors.
pub fn cluster_window(
    reduced: &ReducedSet,
    doc_ids: &[String],
    window: usize,
    params: &ClusterParams,
) -> Result<ClusterAssignment, ClusterError> {
    let mut ids: Vec<String> = doc_ids.to_vec();
    ids.sort();
    let points: Vec<Vec<f64>> = ids.iter().map(|id| reduced.vectors[id].clone()).collect();
    let labels = params.cluster_points(&points)?;
    Ok(ClusterAssignment {
        window,
        doc_ids: ids,
        labels,
        params: *params,
    })
}

#[derive(Debug, Clone)]
pub struct CumulativeClustering {
    pub windows: Vec<ClusterAssignment>,
    /// Per-window silhouette; `None` where fewer than two clusters exist.
    pub silhouettes: Vec<Option<f64>>,
}

impl CumulativeClustering {
    fn defined(&self) -> Vec<f64> {
        self.silhouettes.iter().flatten().copied().collect()
    }

    pub fn mean_silhouette(&self) -> Option<f64> {
        let s = self.defined();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }

    pub fn median_silhouette(&self) -> Option<f64> {
        let mut s = self.defined();
        if s.is_empty() {
            return None;
        }
        s.sort_by(f64::total_cmp);
        let m = s.len() / 2;
        Some(if s.len() % 2 == 1 { s[m] } else { (s[m - 1] + s[m]) / 2.0 })
    }
}

/// Clusters every cumulative window from scratch. Windows run in parallel; windows that add no
/// documents reuse the previous result.
pub fn run_cumulative(
    reduced: &ReducedSet,
    corpus: &Corpus,
    params: &ClusterParams,
) -> Result<CumulativeClustering, ClusterError> {
    params.validate()?;
    let docs = corpus.documents();
    let num_windows = corpus.timeline().num_windows();
    let prefix_lens: Vec<usize> = (0..num_windows).map(|w| corpus.window_members(w).len()).collect();
    let mut distinct = prefix_lens.clone();
    distinct.dedup();

    let solved: Vec<(usize, ClusterAssignment, Option<f64>)> = distinct
        .par_iter()
        .map(|&len| {
            let ids: Vec<String> = docs[..len].iter().map(|d| d.doc_id.clone()).collect();
            let a = cluster_window(reduced, &ids, 0, params)?;
            let points: Vec<Vec<f64>> = a.doc_ids.iter().map(|id| reduced.vectors[id].clone()).collect();
            let sil = silhouette_score(&points, &a.labels).ok();
            Ok((len, a, sil))
        })
        .collect::<Result<_, ClusterError>>()?;
    let by_len: HashMap<usize, (ClusterAssignment, Option<f64>)> =
        solved.into_iter().map(|(len, a, s)| (len, (a, s))).collect();

    let mut windows = Vec::with_capacity(num_windows);
    let mut silhouettes = Vec::with_capacity(num_windows);
    for (w, len) in prefix_lens.iter().enumerate() {
        let (a, s) = &by_len[len];
        let mut a = a.clone();
        a.window = w;
        windows.push(a);
        silhouettes.push(*s);
    }
    Ok(CumulativeClustering {
        windows,
        silhouettes,
    })
}
