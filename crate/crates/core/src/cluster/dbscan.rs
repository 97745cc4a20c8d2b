//! Classic DBSCAN. Neighbourhoods include the point itself.

use std::collections::VecDeque;

use super::{euclidean, normalize_labels, DbscanParams, OUTLIER};
use crate::error::ClusterError;

pub fn dbscan_labels(points: &[Vec<f64>], params: &DbscanParams) -> Result<Vec<i32>, ClusterError> {
    params.validate()?;
    let n = points.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| euclidean(&points[i], &points[j]) <= params.eps)
                .collect()
        })
        .collect();
    let is_core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut labels = vec![OUTLIER; n];
    let mut next = 0;
    for seed in 0..n {
        if !is_core[seed] || labels[seed] != OUTLIER {
            continue;
        }
        labels[seed] = next;
        let mut queue = VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbours[p] {
                if labels[q] == OUTLIER {
                    labels[q] = next;
                    if is_core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    Ok(normalize_labels(&labels))
}
