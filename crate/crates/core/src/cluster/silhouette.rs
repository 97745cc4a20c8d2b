use std::fmt;

use serde::Serialize;

use super::euclidean;
use crate::error::ClusterError;

/// Interpretation bands for silhouette scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SilhouetteBand {
    /// above 0.7
    Strong,
    /// 0.5 to 0.7
    Moderate,
    /// 0.25 to 0.5
    Fair,
    /// below 0.25
    Weak,
}

impl SilhouetteBand {
    pub fn of(score: f64) -> Self {
        if score > 0.7 {
            SilhouetteBand::Strong
        } else if score >= 0.5 {
            SilhouetteBand::Moderate
        } else if score >= 0.25 {
            SilhouetteBand::Fair
        } else {
            SilhouetteBand::Weak
        }
    }
}

impl fmt::Display for SilhouetteBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SilhouetteBand::Strong => "strong",
            SilhouetteBand::Moderate => "moderate",
            SilhouetteBand::Fair => "fair",
            SilhouetteBand::Weak => "weak",
        })
    }
}

/// Mean silhouette over non-outlier points. Members of singleton clusters score 0.
pub fn silhouette_score(points: &[Vec<f64>], labels: &[i32]) -> Result<f64, ClusterError> {
    let kept: Vec<usize> = (0..points.len()).filter(|&i| labels[i] >= 0).collect();
    let k = kept.iter().map(|&i| labels[i]).max().map_or(0, |m| m as usize + 1);
    let mut sizes = vec![0usize; k];
    for &i in &kept {
        sizes[labels[i] as usize] += 1;
    }
    let present = sizes.iter().filter(|&&s| s > 0).count();
    if present < 2 {
        return Err(ClusterError::UndefinedSilhouette(present));
    }

    let mut total = 0.0;
    for &i in &kept {
        let own = labels[i] as usize;
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for &j in &kept {
            if j != i {
                sums[labels[j] as usize] += euclidean(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / kept.len() as f64)
}
