use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading corpora, embedding files and run configs.
#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: i/o error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("duplicate doc_id `{0}`")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no vector for doc_id `{0}`")]
    MissingVector(String),
    #[error("vector for unknown doc_id `{0}`")]
    UnknownDoc(String),
    #[error("doc_id `{doc_id}` has dimension {found}, expected {expected}")]
    InconsistentDim {
        doc_id: String,
        expected: usize,
        found: usize,
    },
    #[error("doc_id `{0}` has a non-finite vector component")]
    NonFinite(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

impl InputError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        InputError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("target dimension {target} exceeds source dimension {source_dim}")]
    TargetTooLarge { target: usize, source_dim: usize },
    #[error("need at least 2 documents, got {0}")]
    TooFewPoints(usize),
    #[error("input is rank-deficient: requested {requested} axes but achievable rank is {achievable}")]
    RankDeficient { requested: usize, achievable: usize },
    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("invalid clustering parameter: {0}")]
    InvalidParams(String),
    #[error("no points to cluster")]
    Empty,
    #[error("silhouette undefined: {0} cluster(s) among non-outlier points")]
    UndefinedSilhouette(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("cluster has no non-outlier members")]
    EmptyCluster,
    #[error("degenerate (zero-norm) centroid for {0}")]
    DegenerateCentroid(String),
    #[error("cost matrix contains a non-finite entry")]
    NonFiniteCost,
    #[error("invalid theta_align {0}: must lie in (0, 1]")]
    InvalidTheta(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("doc `{0}` is absent from every window")]
    AbsentDoc(String),
    #[error("inconsistent trajectory for `{doc_id}`: {reason}")]
    Inconsistent { doc_id: String, reason: String },
    #[error("no integrated ex-outlier delays; an explicit fallback cutoff is required")]
    NoIntegrations,
    #[error("percentile {0} must lie in (0, 1)")]
    InvalidPercentile(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("label matrix has no documents")]
    NoDocuments,
    #[error("need at least {needed} raters, got {found}")]
    TooFewRaters { needed: usize, found: usize },
    #[error("row {row} has {found} labels, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("no outlier-phase documents; TOA share undefined")]
    UndefinedShare,
    #[error("rater `{0}` does not label every document")]
    IncompleteRater(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Top-level error for pipeline runs.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error("missing upstream artifact `{0}`; run the producing step first")]
    MissingArtifact(String),
    #[error("{path}: {reason}")]
    Output { path: PathBuf, reason: String },
    #[error("{failed} of {total} configurations failed (see manifest)")]
    PartialFailure { failed: usize, total: usize },
}
