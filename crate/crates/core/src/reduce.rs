//! Dimensionality reduction ahead of clustering.
//!
//! [`reduce_pca`] is a deterministic linear reducer; [`reduce_passthrough`] accepts vectors that
//! were already reduced elsewhere (e.g. by UMAP) and hands them on unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::EmbeddingSet;
use crate::error::ReduceError;

/// Dimensionalities accepted in sweep configurations.
pub const SWEEP_DIMS: [usize; 7] = [2, 3, 5, 10, 20, 30, 40];

/// Eigenvalues below this fraction of the largest count as zero when measuring rank.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetDim {
    Dim(usize),
    AsProvided,
}

impl fmt::Display for TargetDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetDim::Dim(d) => write!(f, "{d}"),
            TargetDim::AsProvided => f.write_str("as-provided"),
        }
    }
}

impl FromStr for TargetDim {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as-provided" => Ok(TargetDim::AsProvided),
            other => other
                .parse::<usize>()
                .map(TargetDim::Dim)
                .map_err(|_| format!("expected a positive integer or \"as-provided\", got `{other}`")),
        }
    }
}

impl Serialize for TargetDim {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TargetDim::Dim(d) => s.serialize_u64(*d as u64),
            TargetDim::AsProvided => s.serialize_str("as-provided"),
        }
    }
}

impl<'de> Deserialize<'de> for TargetDim {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(TargetDim::Dim(n as usize)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSet {
    pub model_id: String,
    pub target_dim: TargetDim,
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
    /// Variance captured by each retained axis (PCA only).
    pub explained_variance: Vec<f64>,
}

impl ReducedSet {
    pub fn total_variance(&self) -> f64 {
        self.explained_variance.iter().sum()
    }
}

pub fn reduce_passthrough(emb: &EmbeddingSet) -> ReducedSet {
    ReducedSet {
        model_id: emb.model_id.clone(),
        target_dim: TargetDim::AsProvided,
        dim: emb.dim,
        vectors: emb.vectors.clone(),
        explained_variance: Vec::new(),
    }
}

/// Projects mean-centred vectors onto the top `target_dim` principal axes.
///
/// Uses the `dim x dim` covariance when there are at least as many documents as dimensions and
/// the `n x n` Gram matrix otherwise; both yield the same scores. Each axis is oriented so the
/// first document (in doc_id order) with a non-negligible score projects positively, which
/// keeps the output unchanged under orthogonal transforms of the input.
pub fn reduce_pca(emb: &EmbeddingSet, target_dim: usize) -> Result<ReducedSet, ReduceError> {
    let n = emb.vectors.len();
    let d = emb.dim;
    if target_dim > d {
        return Err(ReduceError::TargetTooLarge {
            target: target_dim,
            source_dim: d,
        });
    }
    if n < 2 {
        return Err(ReduceError::TooFewPoints(n));
    }
    if target_dim == 0 {
        return Err(ReduceError::RankDeficient {
            requested: 0,
            achievable: 0,
        });
    }

    let mut x = DMatrix::<f64>::zeros(n, d);
    for (i, v) in emb.vectors.values().enumerate() {
        for (j, &value) in v.iter().enumerate() {
            x[(i, j)] = value;
        }
    }
    for j in 0..d {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }

    let denom = (n - 1) as f64;
    let (scores, eigenvalues) = if d <= n {
        let cov = x.transpose() * &x / denom;
        let (values, vectors) = sorted_eigen(cov)?;
        check_rank(&values, target_dim)?;
        let axes = vectors.columns(0, target_dim).into_owned();
        (&x * axes, values)
    } else {
        let gram = &x * x.transpose() / denom;
        let (values, vectors) = sorted_eigen(gram)?;
        check_rank(&values, target_dim)?;
        let mut scores = DMatrix::<f64>::zeros(n, target_dim);
        for k in 0..target_dim {
            let scale = (values[k] * denom).sqrt();
            scores.set_column(k, &(vectors.column(k) * scale));
        }
        (scores, values)
    };

    let mut scores = scores;
    for k in 0..target_dim {
        let col = scores.column(k);
        let max = col.amax();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-8 * max) {
            if *first < 0.0 {
                scores.column_mut(k).neg_mut();
            }
        }
    }

    let vectors = emb
        .vectors
        .keys()
        .enumerate()
        .map(|(i, id)| (id.clone(), scores.row(i).iter().copied().collect()))
        .collect();
    Ok(ReducedSet {
        model_id: emb.model_id.clone(),
        target_dim: TargetDim::Dim(target_dim),
        dim: target_dim,
        vectors,
        explained_variance: eigenvalues[..target_dim].to_vec(),
    })
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), ReduceError> {
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(ReduceError::NoConvergence)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    Ok((values, vectors))
}

fn check_rank(values: &[f64], requested: usize) -> Result<(), ReduceError> {
    let top = values.first().copied().unwrap_or(0.0);
    let achievable = if top <= 0.0 {
        0
    } else {
        values.iter().filter(|&&v| v > RANK_TOLERANCE * top).count()
    };
    if requested > achievable {
        return Err(ReduceError::RankDeficient {
            requested,
            achievable,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[Vec<f64>]) -> EmbeddingSet {
        EmbeddingSet {
            model_id: "m".into(),
            dim: rows[0].len(),
            vectors: rows
                .iter()
                .enumerate()
                .map(|(i, r)| (format!("d{i:02}"), r.clone()))
                .collect(),
        }
    }

    fn pairwise(vs: &BTreeMap<String, Vec<f64>>) -> Vec<f64> {
        let rows: Vec<&Vec<f64>> = vs.values().collect();
        let mut out = Vec::new();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                out.push(
                    rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
                );
            }
        }
        out
    }

    #[test]
    fn planar_points_keep_distances() {
        // points on span{(1,1,0,0,1), (0,1,-1,2,0)} in 5-D
        let a = [1.0, 1.0, 0.0, 0.0, 1.0];
        let b = [0.0, 1.0, -1.0, 2.0, 0.0];
        let coeffs = [(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5), (2.5, -1.0), (0.3, 4.0)];
        let rows: Vec<Vec<f64>> = coeffs
            .iter()
            .map(|(s, t)| (0..5).map(|k| s * a[k] + t * b[k] + 7.0).collect())
            .collect();
        let emb = set(&rows);
        let r = reduce_pca(&emb, 2).unwrap();
        for (p, q) in pairwise(&emb.vectors).iter().zip(pairwise(&r.vectors)) {
            assert!((p - q).abs() < 1e-9, "{p} vs {q}");
        }
        assert!(matches!(
            reduce_pca(&emb, 3),
            Err(ReduceError::RankDeficient { requested: 3, achievable: 2 })
        ));
    }

    #[test]
    fn full_dimension_is_isometry() {
        let rows = vec![
            vec![0.3, -1.2, 2.0],
            vec![1.1, 0.4, -0.7],
            vec![-2.0, 0.9, 0.1],
            vec![0.5, 0.5, 0.5],
            vec![1.7, -0.3, 1.4],
        ];
        let emb = set(&rows);
        let r = reduce_pca(&emb, 3).unwrap();
        for (p, q) in pairwise(&emb.vectors).iter().zip(pairwise(&r.vectors)) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    /// Largest eigenvalue by power iteration, independent of the nalgebra path.
    fn power_iteration(m: [[f64; 3]; 3]) -> f64 {
        let mut v = [1.0, 0.7, 0.3];
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let w: Vec<f64> = (0..3).map(|i| (0..3).map(|j| m[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = norm;
            for i in 0..3 {
                v[i] = w[i] / norm;
            }
        }
        lambda
    }

    #[test]
    fn one_axis_variance_is_top_eigenvalue() {
        let rows = vec![
            vec![2.0, 0.0, 1.0],
            vec![0.0, 1.0, -1.0],
            vec![-1.0, 3.0, 0.0],
            vec![3.0, -2.0, 2.0],
        ];
        let mut cov = [[0.0; 3]; 3];
        let mean: Vec<f64> = (0..3).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / 4.0).collect();
        for r in &rows {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / 3.0;
                }
            }
        }
        let expected = power_iteration(cov);
        let r = reduce_pca(&set(&rows), 1).unwrap();
        let proj: Vec<f64> = r.vectors.values().map(|v| v[0]).collect();
        let var = proj.iter().map(|p| p * p).sum::<f64>() / 3.0;
        assert!((var - expected).abs() < 1e-9, "{var} vs {expected}");
        assert!((r.explained_variance[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn gram_and_covariance_routes_agree() {
        // 4 docs in 6-D forces the Gram route; padding with 4 more docs forces covariance
        let rows = vec![
            vec![1.0, 0.2, -0.5, 0.0, 3.0, 1.0],
            vec![0.0, 1.5, 0.5, -1.0, 0.0, 2.0],
            vec![2.0, -1.0, 0.0, 0.5, 1.0, 0.0],
            vec![-1.0, 0.0, 1.0, 2.0, -2.0, 0.5],
        ];
        let gram = reduce_pca(&set(&rows), 3).unwrap();
        let mut tall = rows.clone();
        tall.extend(rows.iter().cloned());
        let cov = reduce_pca(&set(&tall), 3).unwrap();
        for (i, v) in gram.vectors.values().enumerate() {
            let w = &cov.vectors[&format!("d{i:02}")];
            for k in 0..3 {
                assert!((v[k] - w[k]).abs() < 1e-8, "axis {k}: {} vs {}", v[k], w[k]);
            }
        }
    }

    #[test]
    fn identical_vectors_are_rank_deficient() {
        let rows = vec![vec![1.0, 2.0, 3.0]; 4];
        assert_eq!(
            reduce_pca(&set(&rows), 1),
            Err(ReduceError::RankDeficient { requested: 1, achievable: 0 })
        );
    }

    #[test]
    fn rejects_oversized_target() {
        let rows = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
        assert_eq!(
            reduce_pca(&set(&rows), 3),
            Err(ReduceError::TargetTooLarge { target: 3, source_dim: 2 })
        );
    }

    #[test]
    fn passthrough_is_identity() {
        let rows = vec![vec![0.1, 0.2], vec![0.3, -0.4]];
        let emb = set(&rows);
        let r = reduce_passthrough(&emb);
        assert_eq!(r.vectors, emb.vectors);
        assert_eq!(r.target_dim, TargetDim::AsProvided);
        let forty: Vec<Vec<f64>> = (0..3).map(|i| (0..40).map(|j| (i * j) as f64).collect()).collect();
        assert_eq!(reduce_passthrough(&set(&forty)).vectors, set(&forty).vectors);
    }

    #[test]
    fn target_dim_parses() {
        assert_eq!("as-provided".parse::<TargetDim>(), Ok(TargetDim::AsProvided));
        assert_eq!("5".parse::<TargetDim>(), Ok(TargetDim::Dim(5)));
        assert!("five".parse::<TargetDim>().is_err());
    }
}
