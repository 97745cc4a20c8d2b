//! Python bindings for `newstraj`.
//!
//! ```python
//! import newstraj_py as nt
//! nt.assign_case(t_a=1, t_t=3, t_i=3, t_final=10, theta_delay=26)   # 'TOA_first'
//! nt.fleiss_kappa([["A", "A", "B"], ["B", "B", "A"]])               # -0.333...
//! ```

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use newstraj::agreement::{self, Kappa, LabelMatrix};
use newstraj::align::{self as nalign, AlignmentConfig, TopicId, TopicRegistry, TopicSnapshot, Verdict};
use newstraj::cluster::{self, DbscanParams, HdbscanParams};
use newstraj::config::RunConfig;
use newstraj::corpus::{self, EmbeddingSet};
use newstraj::error::{InputError, PipelineError};
use newstraj::pipeline::{self, RunOptions};
use newstraj::reduce;
use newstraj::taxonomy::{self, Trajectory};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn input_err(e: InputError) -> PyErr {
    match e {
        InputError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Input(i) => input_err(i),
        other => value_err(other),
    }
}

fn label_matrix(labels: Vec<Vec<String>>) -> PyResult<LabelMatrix> {
    let raters = labels.first().map_or(0, Vec::len);
    LabelMatrix::new(
        (0..labels.len()).map(|i| format!("{i:08}")).collect(),
        (0..raters).map(|j| format!("r{j}")).collect(),
        labels,
    )
    .map_err(value_err)
}

/// Minimum-cost assignment as sorted `(row, col)` pairs.
#[pyfunction]
pub fn hungarian(cost: Vec<Vec<f64>>) -> PyResult<Vec<(usize, usize)>> {
    nalign::hungarian(&cost).map_err(value_err)
}

/// Fleiss' kappa over `labels[doc][rater]`; `None` when only one label occurs.
#[pyfunction]
pub fn fleiss_kappa(labels: Vec<Vec<String>>) -> PyResult<Option<f64>> {
    Ok(match agreement::fleiss_kappa(&label_matrix(labels)?).map_err(value_err)? {
        Kappa::Value(k) => Some(k),
        Kappa::Degenerate => None,
    })
}

/// `(overall, per_doc)` majority agreement.
#[pyfunction]
pub fn majority_agreement(labels: Vec<Vec<String>>) -> PyResult<(f64, Vec<f64>)> {
    let ma = agreement::majority_agreement(&label_matrix(labels)?).map_err(value_err)?;
    Ok((ma.overall, ma.per_doc.into_values().collect()))
}

/// `(N, fraction of docs with at least N raters giving target)` for `N = 1..=M`.
#[pyfunction]
pub fn consensus_curve(labels: Vec<Vec<String>>, target: &str) -> PyResult<Vec<(usize, f64)>> {
    Ok(agreement::consensus_curve(&label_matrix(labels)?, target))
}

#[pyfunction]
pub fn toa_share(cases: Vec<String>) -> PyResult<f64> {
    let cases = cases
        .iter()
        .map(|c| c.parse::<taxonomy::Case>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    agreement::toa_share(&cases).map_err(value_err)
}

/// Case name for one trajectory. `t_i` and `t_t` are both given or both omitted;
/// `t_final` defaults to the latest event window.
#[pyfunction]
#[pyo3(signature = (t_a, t_t=None, t_i=None, t_final=None, theta_delay=0))]
pub fn assign_case(
    t_a: usize,
    t_t: Option<usize>,
    t_i: Option<usize>,
    t_final: Option<usize>,
    theta_delay: usize,
) -> PyResult<String> {
    let t_final = t_final.unwrap_or(t_a.max(t_i.unwrap_or(t_a)));
    let t = Trajectory {
        doc_id: String::new(),
        appearance: t_a,
        integration: t_i,
        topic: t_i.map(|_| TopicId(0)),
        topic_created: t_t,
    };
    taxonomy::assign_case(&t, t_final, theta_delay)
        .map(|c| c.as_str().to_string())
        .map_err(value_err)
}

#[pyfunction]
pub fn delay_quantile(delays: Vec<usize>, q: f64) -> Option<usize> {
    taxonomy::delay_quantile(&delays, q)
}

/// `{"steps": [(t, S(t))], "p50": .., "p75": .., "p90": .., "p95": .., "sample_size": ..}`
#[pyfunction]
pub fn survival_curve(py: Python<'_>, delays: Vec<usize>) -> PyResult<BTreeMap<String, Py<PyAny>>> {
    let c = taxonomy::survival_curve(&delays).map_err(value_err)?;
    let mut out = BTreeMap::new();
    out.insert("steps".into(), c.steps.into_pyobject(py)?.into_any().unbind());
    for (k, v) in [("p50", c.p50), ("p75", c.p75), ("p90", c.p90), ("p95", c.p95), ("sample_size", c.sample_size)] {
        out.insert(k.to_string(), v.into_pyobject(py)?.into_any().unbind());
    }
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (delays, percentile=0.9))]
pub fn compute_cutoff(delays: Vec<usize>, percentile: f64) -> PyResult<usize> {
    taxonomy::compute_cutoff(&delays, percentile)
        .map(|c| c.theta_delay)
        .map_err(value_err)
}

/// `(labels, outlier_scores)`; `-1` marks outliers.
#[pyfunction]
#[pyo3(signature = (points, min_cluster_size=5, min_samples=None, allow_single_cluster=false))]
pub fn hdbscan(
    points: Vec<Vec<f64>>,
    min_cluster_size: usize,
    min_samples: Option<usize>,
    allow_single_cluster: bool,
) -> PyResult<(Vec<i32>, Vec<f64>)> {
    let params = HdbscanParams {
        min_cluster_size,
        min_samples,
        allow_single_cluster,
    };
    params.validate().map_err(value_err)?;
    let out = cluster::hdbscan_labels(&points, &params);
    Ok((out.labels, out.outlier_scores))
}

#[pyfunction]
pub fn dbscan(points: Vec<Vec<f64>>, eps: f64, min_pts: usize) -> PyResult<Vec<i32>> {
    cluster::dbscan_labels(&points, &DbscanParams { eps, min_pts }).map_err(value_err)
}

#[pyfunction]
pub fn silhouette(points: Vec<Vec<f64>>, labels: Vec<i32>) -> PyResult<f64> {
    cluster::silhouette_score(&points, &labels).map_err(value_err)
}

/// PCA of `{doc_id: vector}` down to `target_dim` axes.
#[pyfunction]
pub fn pca(vectors: BTreeMap<String, Vec<f64>>, target_dim: usize) -> PyResult<BTreeMap<String, Vec<f64>>> {
    let dim = vectors.values().next().map_or(0, Vec::len);
    let set = EmbeddingSet {
        model_id: String::new(),
        dim,
        vectors,
    };
    reduce::reduce_pca(&set, target_dim).map(|r| r.vectors).map_err(value_err)
}

/// `{doc_id: vector}` validated against the corpus at `corpus_path`.
#[pyfunction]
pub fn load_embeddings(path: &str, model_id: &str, corpus_path: &str) -> PyResult<BTreeMap<String, Vec<f64>>> {
    let corpus = corpus::load_corpus(corpus_path).map_err(input_err)?;
    corpus::load_embeddings(path, model_id, &corpus)
        .map(|e| e.vectors)
        .map_err(input_err)
}

/// Loaded corpus with its day-window timeline.
#[pyclass(frozen)]
pub struct Corpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    pub fn load(path: &str) -> PyResult<Self> {
        corpus::load_corpus(path).map(|inner| Corpus { inner }).map_err(input_err)
    }

    pub fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    pub fn num_windows(&self) -> usize {
        self.inner.timeline().num_windows()
    }

    /// Doc ids sorted by (date, id).
    pub fn doc_ids(&self) -> Vec<String> {
        self.inner.documents().iter().map(|d| d.doc_id.clone()).collect()
    }

    /// `(iso date, daily, cumulative)` per window.
    pub fn daily_counts(&self) -> Vec<(String, usize, usize)> {
        self.inner
            .daily_counts()
            .into_iter()
            .map(|(d, n, c)| (d.to_string(), n, c))
            .collect()
    }

    pub fn window_of(&self, doc_id: &str) -> PyResult<usize> {
        let d = self
            .inner
            .documents()
            .iter()
            .find(|d| d.doc_id == doc_id)
            .ok_or_else(|| value_err(format!("unknown doc_id {doc_id}")))?;
        Ok(self.inner.timeline().window_of(d.published_at))
    }
}

/// Window-by-window topic alignment with persistent ids.
#[pyclass]
pub struct TopicTracker {
    registry: TopicRegistry,
    config: AlignmentConfig,
}

#[pymethods]
impl TopicTracker {
    #[new]
    #[pyo3(signature = (theta_align=0.3))]
    pub fn new(theta_align: f64) -> PyResult<Self> {
        Ok(TopicTracker {
            registry: TopicRegistry::new(),
            config: AlignmentConfig::new(theta_align).map_err(value_err)?,
        })
    }

    /// Aligns one window's cluster centroids. Returns `("continued" | "new", topic_id)` per cluster.
    #[pyo3(signature = (window, centroids, member_counts=None))]
    pub fn align_window(
        &mut self,
        window: usize,
        centroids: Vec<Vec<f64>>,
        member_counts: Option<Vec<usize>>,
    ) -> PyResult<Vec<(String, u32)>> {
        let counts = member_counts.unwrap_or_else(|| vec![1; centroids.len()]);
        if counts.len() != centroids.len() {
            return Err(value_err("member_counts length differs from centroids"));
        }
        let snaps: Vec<TopicSnapshot> = centroids
            .into_iter()
            .zip(counts)
            .map(|(centroid, member_count)| TopicSnapshot { centroid, member_count })
            .collect();
        let verdicts = self
            .registry
            .align_window(window, &snaps, &self.config)
            .map_err(value_err)?;
        Ok(verdicts
            .into_iter()
            .map(|v| match v {
                Verdict::Continued(t) => ("continued".to_string(), t.0),
                Verdict::New(t) => ("new".to_string(), t.0),
            })
            .collect())
    }

    /// Window in which `topic_id` was minted.
    pub fn created_window(&self, topic_id: u32) -> Option<usize> {
        self.registry.topic(TopicId(topic_id)).map(|t| t.created_window)
    }

    pub fn active_topics(&self) -> Vec<u32> {
        self.registry.topics().filter(|t| t.active).map(|t| t.id.0).collect()
    }
}

/// Writes the config's `[synthetic]` scenario to its corpus and embedding paths.
#[pyfunction]
pub fn synthesize(config_path: &str) -> PyResult<()> {
    let cfg = RunConfig::load(config_path).map_err(value_err)?;
    pipeline::synthesize(&cfg).map_err(pipeline_err)
}

/// Runs the sweep and returns the manifest as a JSON string.
#[pyfunction]
#[pyo3(signature = (config_path, jobs=None, fingerprints=Vec::new()))]
pub fn run_pipeline(py: Python<'_>, config_path: &str, jobs: Option<usize>, fingerprints: Vec<String>) -> PyResult<String> {
    let cfg = RunConfig::load(config_path).map_err(value_err)?;
    let opts = RunOptions {
        jobs,
        fingerprint_filters: fingerprints,
    };
    let summary = py.detach(|| pipeline::run_pipeline(&cfg, &opts)).map_err(pipeline_err)?;
    serde_json::to_string(&summary.manifest).map_err(value_err)
}

#[pymodule]
fn newstraj_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(fleiss_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(majority_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(consensus_curve, m)?)?;
    m.add_function(wrap_pyfunction!(toa_share, m)?)?;
    m.add_function(wrap_pyfunction!(assign_case, m)?)?;
    m.add_function(wrap_pyfunction!(delay_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(survival_curve, m)?)?;
    m.add_function(wrap_pyfunction!(compute_cutoff, m)?)?;
    m.add_function(wrap_pyfunction!(hdbscan, m)?)?;
    m.add_function(wrap_pyfunction!(dbscan, m)?)?;
    m.add_function(wrap_pyfunction!(silhouette, m)?)?;
    m.add_function(wrap_pyfunction!(pca, m)?)?;
    m.add_function(wrap_pyfunction!(load_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_class::<Corpus>()?;
    m.add_class::<TopicTracker>()?;
    Ok(())
}
