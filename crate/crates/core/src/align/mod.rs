//! Persistent topic identities across consecutive windows.
//!
//! Clusters of window `w` are matched to the topics alive at `w - 1` by centroid cosine distance
//! and one global Hungarian matching. Matched pairs within `theta_align` continue the previous
//! topic; everything else mints a new topic created at `w`. Topics not continued are retired
//! and never revived.

mod hungarian;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use hungarian::{assignment_cost, hungarian};

use crate::cluster::{ClusterAssignment, CumulativeClustering};
use crate::error::AlignError;
use crate::reduce::ReducedSet;

/// Sweep values for `theta_align`.
pub const THETA_SWEEP: [f64; 6] = [0.20, 0.30, 0.40, 0.50, 0.60, 0.70];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub u32);

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentConfig {
    pub theta_align: f64,
}

impl AlignmentConfig {
    pub fn new(theta_align: f64) -> Result<Self, AlignError> {
        if theta_align > 0.0 && theta_align <= 1.0 {
            Ok(AlignmentConfig { theta_align })
        } else {
            Err(AlignError::InvalidTheta(theta_align))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicSnapshot {
    pub centroid: Vec<f64>,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub id: TopicId,
    pub created_window: usize,
    pub history: BTreeMap<usize, TopicSnapshot>,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Continued(TopicId),
    New(TopicId),
}

impl Verdict {
    pub fn topic(&self) -> TopicId {
        match *self {
            Verdict::Continued(t) | Verdict::New(t) => t,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopicRegistry {
    topics: BTreeMap<TopicId, Topic>,
    next_id: u32,
    /// Per window: cluster id -> persistent topic.
    window_topics: BTreeMap<usize, Vec<TopicId>>,
    last_window: Option<usize>,
}

impl TopicRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn topics(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values()
    }

    pub fn topic(&self, id: TopicId) -> Option<&Topic> {
        self.topics.get(&id)
    }

    /// Persistent topic of cluster `cluster` in window `window`.
    pub fn topic_of(&self, window: usize, cluster: i32) -> Option<TopicId> {
        if cluster < 0 {
            return None;
        }
        self.window_topics.get(&window)?.get(cluster as usize).copied()
    }

    pub fn window_topics(&self, window: usize) -> &[TopicId] {
        self.window_topics.get(&window).map_or(&[], Vec::as_slice)
    }

    fn mint(&mut self, window: usize) -> TopicId {
        let id = TopicId(self.next_id);
        self.next_id += 1;
        self.topics.insert(
            id,
            Topic {
                id,
                created_window: window,
                history: BTreeMap::new(),
                active: true,
            },
        );
        id
    }

    /// Links the clusters of `window` (given as centroids and sizes, indexed by cluster id) to
    /// the topics of the previously aligned window.
    pub fn align_window(
        &mut self,
        window: usize,
        clusters: &[TopicSnapshot],
        cfg: &AlignmentConfig,
    ) -> Result<Vec<Verdict>, AlignError> {
        let previous: Vec<TopicId> = self
            .last_window
            .map(|w| self.window_topics(w).to_vec())
            .unwrap_or_default();
        let prev_centroids: Vec<&[f64]> = previous
            .iter()
            .map(|id| {
                let t = &self.topics[id];
                t.history.values().next_back().expect("aligned topics have history").centroid.as_slice()
            })
            .collect();
        let curr_centroids: Vec<&[f64]> = clusters.iter().map(|c| c.centroid.as_slice()).collect();

        let mut verdicts: Vec<Option<Verdict>> = vec![None; clusters.len()];
        if !previous.is_empty() && !clusters.is_empty() {
            let dist = cosine_distance_matrix(&prev_centroids, &curr_centroids).map_err(|e| match e {
                CentroidSide::Previous(i) => AlignError::DegenerateCentroid(format!("topic {}", previous[i])),
                CentroidSide::Current(j) => {
                    AlignError::DegenerateCentroid(format!("cluster {j} at window {window}"))
                }
            })?;
            for (i, j) in hungarian(&dist)? {
                if dist[i][j] <= cfg.theta_align {
                    verdicts[j] = Some(Verdict::Continued(previous[i]));
                }
            }
        } else {
            for (j, c) in curr_centroids.iter().enumerate() {
                if norm(c) == 0.0 {
                    return Err(AlignError::DegenerateCentroid(format!("cluster {j} at window {window}")));
                }
            }
        }

        let verdicts: Vec<Verdict> = verdicts
            .into_iter()
            .map(|v| v.unwrap_or_else(|| Verdict::New(self.mint(window))))
            .collect();
        let continued: Vec<TopicId> = verdicts
            .iter()
            .filter_map(|v| match v {
                Verdict::Continued(t) => Some(*t),
                Verdict::New(_) => None,
            })
            .collect();
        for id in &previous {
            if !continued.contains(id) {
                self.topics.get_mut(id).expect("known topic").active = false;
            }
        }
        for (v, snap) in verdicts.iter().zip(clusters) {
            self.topics
                .get_mut(&v.topic())
                .expect("known topic")
                .history
                .insert(window, snap.clone());
        }
        self.window_topics.insert(window, verdicts.iter().map(Verdict::topic).collect());
        self.last_window = Some(window);
        Ok(verdicts)
    }
}

pub fn centroid(members: &[&[f64]]) -> Result<Vec<f64>, AlignError> {
    let first = members.first().ok_or(AlignError::EmptyCluster)?;
    let mut sum = vec![0.0; first.len()];
    for m in members {
        for (s, x) in sum.iter_mut().zip(m.iter()) {
            *s += x;
        }
    }
    let n = members.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub enum CentroidSide {
    Previous(usize),
    Current(usize),
}

/// `D[i][j] = 1 - cos(prev_i, curr_j)`, clamped to `[0, 2]`.
pub fn cosine_distance_matrix(prev: &[&[f64]], curr: &[&[f64]]) -> Result<Vec<Vec<f64>>, CentroidSide> {
    let prev_norms: Vec<f64> = prev.iter().map(|v| norm(v)).collect();
    let curr_norms: Vec<f64> = curr.iter().map(|v| norm(v)).collect();
    if let Some(i) = prev_norms.iter().position(|&n| n == 0.0) {
        return Err(CentroidSide::Previous(i));
    }
    if let Some(j) = curr_norms.iter().position(|&n| n == 0.0) {
        return Err(CentroidSide::Current(j));
    }
    Ok(prev
        .iter()
        .zip(&prev_norms)
        .map(|(p, pn)| {
            curr.iter()
                .zip(&curr_norms)
                .map(|(c, cn)| {
                    let dot: f64 = p.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
                    (1.0 - dot / (pn * cn)).clamp(0.0, 2.0)
                })
                .collect()
        })
        .collect())
}

/// Centroid and size of every cluster in one window, indexed by cluster id.
pub fn window_snapshots(
    assignment: &ClusterAssignment,
    reduced: &ReducedSet,
) -> Result<Vec<TopicSnapshot>, AlignError> {
    assignment
        .members()
        .iter()
        .map(|members| {
            let vecs: Vec<&[f64]> = members
                .iter()
                .map(|&i| reduced.vectors[&assignment.doc_ids[i]].as_slice())
                .collect();
            Ok(TopicSnapshot {
                centroid: centroid(&vecs)?,
                member_count: vecs.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub registry: TopicRegistry,
    pub verdicts: Vec<Vec<Verdict>>,
}

impl Alignment {
    /// Number of cluster-to-topic continuations over all windows.
    pub fn continued_links(&self) -> usize {
        self.verdicts
            .iter()
            .flatten()
            .filter(|v| matches!(v, Verdict::Continued(_)))
            .count()
    }
}

/// Aligns every window of a cumulative clustering in order.
pub fn align_sequence(
    clustering: &CumulativeClustering,
    reduced: &ReducedSet,
    cfg: &AlignmentConfig,
) -> Result<Alignment, AlignError> {
    let mut registry = TopicRegistry::new();
    let mut verdicts = Vec::with_capacity(clustering.windows.len());
    for a in &clustering.windows {
        let snaps = window_snapshots(a, reduced)?;
        verdicts.push(registry.align_window(a.window, &snaps, cfg)?);
    }
    Ok(Alignment { registry, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(c: &[f64]) -> TopicSnapshot {
        TopicSnapshot {
            centroid: c.to_vec(),
            member_count: 5,
        }
    }

    #[test]
    fn centroid_cases() {
        assert_eq!(centroid(&[&[0.0, 0.0], &[2.0, 0.0]]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(centroid(&[&[3.0, -1.5]]).unwrap(), vec![3.0, -1.5]);
        assert_eq!(centroid(&[]), Err(AlignError::EmptyCluster));
    }

    #[test]
    fn cosine_cases() {
        let d = cosine_distance_matrix(&[&[1.0, 0.0], &[1.0, 1.0]], &[&[2.0, 0.0], &[0.0, 1.0]]).ok().unwrap();
        assert_eq!(d[0][0], 0.0);
        assert!((d[0][1] - 1.0).abs() < 1e-15);
        assert!((d[1][0] - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!(cosine_distance_matrix(&[&[0.0, 0.0]], &[&[1.0, 0.0]]).is_err());
    }

    /// Unit vector at `angle` radians.
    fn dir(angle: f64) -> Vec<f64> {
        vec![angle.cos(), angle.sin()]
    }

    /// Angle whose cosine distance from the x-axis is `d`.
    fn angle_for(d: f64) -> f64 {
        (1.0 - d).acos()
    }

    #[test]
    fn small_move_continues() {
        let cfg = AlignmentConfig::new(0.30).unwrap();
        let mut reg = TopicRegistry::new();
        let v0 = reg.align_window(0, &[snap(&dir(0.0))], &cfg).unwrap();
        let v1 = reg.align_window(1, &[snap(&dir(angle_for(0.05)))], &cfg).unwrap();
        assert_eq!(v1, vec![Verdict::Continued(v0[0].topic())]);
        assert_eq!(reg.topic(v0[0].topic()).unwrap().created_window, 0);
    }

    #[test]
    fn large_move_is_severed() {
        let cfg = AlignmentConfig::new(0.20).unwrap();
        let mut reg = TopicRegistry::new();
        let v0 = reg.align_window(0, &[snap(&dir(0.0))], &cfg).unwrap();
        let v1 = reg.align_window(1, &[snap(&dir(angle_for(0.25)))], &cfg).unwrap();
        match v1[0] {
            Verdict::New(t) => {
                assert_ne!(t, v0[0].topic());
                assert_eq!(reg.topic(t).unwrap().created_window, 1);
            }
            other => panic!("expected new topic, got {other:?}"),
        }
        assert!(!reg.topic(v0[0].topic()).unwrap().active);
    }

    #[test]
    fn split_continues_one_child() {
        let cfg = AlignmentConfig::new(0.30).unwrap();
        let mut reg = TopicRegistry::new();
        let v0 = reg.align_window(0, &[snap(&dir(0.0))], &cfg).unwrap();
        let v1 = reg
            .align_window(1, &[snap(&dir(angle_for(0.02))), snap(&dir(-angle_for(0.03)))], &cfg)
            .unwrap();
        let continued: Vec<_> = v1.iter().filter(|v| matches!(v, Verdict::Continued(_))).collect();
        assert_eq!(continued.len(), 1);
        assert_eq!(v1[0], Verdict::Continued(v0[0].topic()));
        assert!(matches!(v1[1], Verdict::New(_)));
    }

    #[test]
    fn vanished_topics_do_not_return() {
        let cfg = AlignmentConfig::new(0.5).unwrap();
        let mut reg = TopicRegistry::new();
        let v0 = reg.align_window(0, &[snap(&[1.0, 0.0])], &cfg).unwrap();
        reg.align_window(1, &[], &cfg).unwrap();
        let v2 = reg.align_window(2, &[snap(&[1.0, 0.0])], &cfg).unwrap();
        assert!(matches!(v2[0], Verdict::New(t) if t != v0[0].topic()));
    }

    #[test]
    fn theta_bounds() {
        assert!(AlignmentConfig::new(0.0).is_err());
        assert!(AlignmentConfig::new(1.0).is_ok());
        assert!(AlignmentConfig::new(1.2).is_err());
    }

    #[test]
    fn scale_invariant_verdicts() {
        let cfg = AlignmentConfig::new(0.3).unwrap();
        let w0 = [snap(&[1.0, 0.2]), snap(&[-0.5, 2.0])];
        let w1 = [snap(&[0.1, 1.9]), snap(&[1.1, 0.1]), snap(&[-3.0, -3.0])];
        let run = |scale: f64| {
            let mut reg = TopicRegistry::new();
            let s = |w: &[TopicSnapshot]| -> Vec<TopicSnapshot> {
                w.iter().map(|t| snap(&t.centroid.iter().map(|x| x * scale).collect::<Vec<_>>())).collect()
            };
            let a = reg.align_window(0, &s(&w0), &cfg).unwrap();
            let b = reg.align_window(1, &s(&w1), &cfg).unwrap();
            (a, b)
        };
        assert_eq!(run(1.0), run(37.5));
    }
}
