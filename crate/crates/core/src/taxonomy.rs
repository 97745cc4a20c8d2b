//! Document trajectories and the seven-case temporal taxonomy.
//!
//! Each document is reduced to three window indices: appearance `T_A`, creation of the topic it
//! joins `T_T`, and first integration `T_I`. Their order decides the case; documents that never
//! integrate are split by their age at the final window against the delay cutoff.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::{TopicId, TopicRegistry};
use crate::cluster::ClusterAssignment;
use crate::error::TaxonomyError;

pub const DEFAULT_DELAY_PERCENTILE: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "TOA_first")]
    ToaFirst,
    #[serde(rename = "TOA_late")]
    ToaLate,
    #[serde(rename = "TOD_late")]
    TodLate,
    #[serde(rename = "T_first")]
    TFirst,
    #[serde(rename = "T_late")]
    TLate,
    #[serde(rename = "O_recent")]
    ORecent,
    #[serde(rename = "O_old")]
    OOld,
}

/// Coarse grouping of cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseGroup {
    /// anticipatory outlier later integrated
    Toa,
    /// drift outlier later integrated
    Tod,
    /// integrated without an outlier phase
    Tno,
    /// never integrated
    O,
}

impl Case {
    pub const ALL: [Case; 7] = [
        Case::ToaFirst,
        Case::ToaLate,
        Case::TodLate,
        Case::TFirst,
        Case::TLate,
        Case::ORecent,
        Case::OOld,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Case::ToaFirst => "TOA_first",
            Case::ToaLate => "TOA_late",
            Case::TodLate => "TOD_late",
            Case::TFirst => "T_first",
            Case::TLate => "T_late",
            Case::ORecent => "O_recent",
            Case::OOld => "O_old",
        }
    }

    pub fn group(&self) -> CaseGroup {
        match self {
            Case::ToaFirst | Case::ToaLate => CaseGroup::Toa,
            Case::TodLate => CaseGroup::Tod,
            Case::TFirst | Case::TLate => CaseGroup::Tno,
            Case::ORecent | Case::OOld => CaseGroup::O,
        }
    }

    pub fn is_anticipatory(&self) -> bool {
        self.group() == CaseGroup::Toa
    }

    /// Spent at least one window as an outlier (`TO` or `O`).
    pub fn has_outlier_phase(&self) -> bool {
        self.group() != CaseGroup::Tno
    }

    /// Outlier that later integrated; these feed the delay distribution.
    pub fn is_integrated_outlier(&self) -> bool {
        matches!(self.group(), CaseGroup::Toa | CaseGroup::Tod)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Case::ALL
            .iter()
            .find(|c| c.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown case `{s}`"))
    }
}

/// Event times of one document (no case yet).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub doc_id: String,
    pub appearance: usize,
    pub integration: Option<usize>,
    pub topic: Option<TopicId>,
    pub topic_created: Option<usize>,
}

impl Trajectory {
    /// `T_I - T_A` for integrated documents.
    pub fn delay(&self) -> Option<usize> {
        self.integration.map(|ti| ti.saturating_sub(self.appearance))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub trajectory: Trajectory,
    pub case: Case,
}

impl TrajectoryRecord {
    pub fn delay(&self) -> Option<usize> {
        self.trajectory.delay()
    }
}

/// Reads a document's event times off the per-window assignments. Only the first integration
/// counts; later relapses to outlier are ignored.
pub fn extract_trajectory(
    doc_id: &str,
    windows: &[ClusterAssignment],
    registry: &TopicRegistry,
) -> Result<Trajectory, TaxonomyError> {
    let mut appearance = None;
    for a in windows {
        let Some(label) = a.label_of(doc_id) else {
            continue;
        };
        appearance.get_or_insert(a.window);
        if label >= 0 {
            let topic = registry.topic_of(a.window, label).ok_or_else(|| TaxonomyError::Inconsistent {
                doc_id: doc_id.to_string(),
                reason: format!("cluster {label} in window {} has no persistent topic", a.window),
            })?;
            let created = registry.topic(topic).map(|t| t.created_window).ok_or_else(|| {
                TaxonomyError::Inconsistent {
                    doc_id: doc_id.to_string(),
                    reason: format!("unknown topic {topic}"),
                }
            })?;
            return Ok(Trajectory {
                doc_id: doc_id.to_string(),
                appearance: appearance.expect("set above"),
                integration: Some(a.window),
                topic: Some(topic),
                topic_created: Some(created),
            });
        }
    }
    let appearance = appearance.ok_or_else(|| TaxonomyError::AbsentDoc(doc_id.to_string()))?;
    Ok(Trajectory {
        doc_id: doc_id.to_string(),
        appearance,
        integration: None,
        topic: None,
        topic_created: None,
    })
}

/// Decision tree over `(T_A, T_T, T_I)`.
///
/// Integrated documents: `T_A < T_I` marks an outlier phase, then `T_A < T_T` separates
/// anticipatory from drift outliers and `T_I = T_T` separates "first" from "late". Documents
/// never integrated are `O_recent` when `T_final - T_A < theta_delay`, else `O_old`.
pub fn assign_case(traj: &Trajectory, final_window: usize, theta_delay: usize) -> Result<Case, TaxonomyError> {
    let inconsistent = |reason: String| TaxonomyError::Inconsistent {
        doc_id: traj.doc_id.clone(),
        reason,
    };
    let ta = traj.appearance;
    if final_window < ta {
        return Err(inconsistent(format!("T_A={ta} after T_final={final_window}")));
    }
    match (traj.integration, traj.topic_created) {
        (Some(ti), Some(tt)) => {
            if ta > ti {
                return Err(inconsistent(format!("T_A={ta} > T_I={ti}")));
            }
            if tt > ti {
                return Err(inconsistent(format!("T_T={tt} > T_I={ti}")));
            }
            if ti > final_window {
                return Err(inconsistent(format!("T_I={ti} after T_final={final_window}")));
            }
            Ok(if ta < ti {
                if ta < tt {
                    if ti == tt {
                        Case::ToaFirst
                    } else {
                        Case::ToaLate
                    }
                } else {
                    Case::TodLate
                }
            } else if ti == tt {
                Case::TFirst
            } else {
                Case::TLate
            })
        }
        (None, None) => Ok(if final_window - ta < theta_delay {
            Case::ORecent
        } else {
            Case::OOld
        }),
        _ => Err(inconsistent("T_I and T_T must be both present or both absent".into())),
    }
}

/// Empirical survival `S(t) = P(delay > t)` with quantile markers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub sample_size: usize,
    /// `(t, S(t))` for `t = 0..=max delay`.
    pub steps: Vec<(usize, f64)>,
    pub p50: usize,
    pub p75: usize,
    pub p90: usize,
    pub p95: usize,
}

impl SurvivalCurve {
    pub fn at(&self, t: i64) -> f64 {
        if t < 0 {
            1.0
        } else {
            self.steps.get(t as usize).map_or(0.0, |s| s.1)
        }
    }
}

/// Smallest `t` with `fraction(delay <= t) >= q`.
pub fn delay_quantile(delays: &[usize], q: f64) -> Option<usize> {
    if delays.is_empty() {
        return None;
    }
    let mut sorted = delays.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // rank = ceil(q * n), guarding against q * n landing a hair above an integer
    let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Some(sorted[rank.min(n) - 1])
}

pub fn survival_curve(delays: &[usize]) -> Result<SurvivalCurve, TaxonomyError> {
    if delays.is_empty() {
        return Err(TaxonomyError::NoIntegrations);
    }
    let n = delays.len();
    let max = *delays.iter().max().expect("non-empty");
    let mut counts = vec![0usize; max + 1];
    for &d in delays {
        counts[d] += 1;
    }
    let mut at_most = 0;
    let steps = counts
        .iter()
        .enumerate()
        .map(|(t, c)| {
            at_most += c;
            (t, (n - at_most) as f64 / n as f64)
        })
        .collect();
    let q = |p| delay_quantile(delays, p).expect("non-empty");
    Ok(SurvivalCurve {
        sample_size: n,
        steps,
        p50: q(0.50),
        p75: q(0.75),
        p90: q(0.90),
        p95: q(0.95),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayCutoff {
    pub theta_delay: usize,
    pub percentile: f64,
    pub sample_size: usize,
}

pub fn compute_cutoff(delays: &[usize], percentile: f64) -> Result<DelayCutoff, TaxonomyError> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(TaxonomyError::InvalidPercentile(percentile));
    }
    let theta_delay = delay_quantile(delays, percentile).ok_or(TaxonomyError::NoIntegrations)?;
    Ok(DelayCutoff {
        theta_delay,
        percentile,
        sample_size: delays.len(),
    })
}

/// Delays of documents that were outliers and later integrated.
pub fn integrated_outlier_delays(records: &[TrajectoryRecord]) -> Vec<usize> {
    records
        .iter()
        .filter(|r| r.case.is_integrated_outlier())
        .filter_map(TrajectoryRecord::delay)
        .collect()
}

/// Delays of trajectories whose event order implies an outlier phase (`T_A < T_I`).
/// Usable before cases are assigned, since the cutoff only affects non-integrated documents.
pub fn outlier_phase_delays(trajectories: &[Trajectory]) -> Vec<usize> {
    trajectories
        .iter()
        .filter_map(|t| t.delay().filter(|&d| d > 0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrated(ta: usize, tt: usize, ti: usize) -> Trajectory {
        Trajectory {
            doc_id: "d".into(),
            appearance: ta,
            integration: Some(ti),
            topic: Some(TopicId(0)),
            topic_created: Some(tt),
        }
    }

    fn loose(ta: usize) -> Trajectory {
        Trajectory {
            doc_id: "d".into(),
            appearance: ta,
            integration: None,
            topic: None,
            topic_created: None,
        }
    }

    #[test]
    fn reference_cases() {
        assert_eq!(assign_case(&integrated(1, 3, 3), 80, 26), Ok(Case::ToaFirst));
        assert_eq!(assign_case(&integrated(1, 2, 4), 80, 26), Ok(Case::ToaLate));
        assert_eq!(assign_case(&integrated(5, 2, 5), 80, 26), Ok(Case::TLate));
        assert_eq!(assign_case(&integrated(4, 4, 4), 80, 26), Ok(Case::TFirst));
        assert_eq!(assign_case(&integrated(3, 1, 6), 80, 26), Ok(Case::TodLate));
        assert_eq!(assign_case(&loose(60), 80, 26), Ok(Case::ORecent));
        assert_eq!(assign_case(&loose(54), 80, 26), Ok(Case::OOld));
    }

    #[test]
    fn inconsistent_triples_rejected() {
        assert!(matches!(assign_case(&integrated(5, 2, 4), 80, 26), Err(TaxonomyError::Inconsistent { .. })));
        assert!(matches!(assign_case(&integrated(1, 5, 4), 80, 26), Err(TaxonomyError::Inconsistent { .. })));
        assert!(matches!(assign_case(&loose(9), 8, 26), Err(TaxonomyError::Inconsistent { .. })));
        let mut half = integrated(1, 2, 3);
        half.topic_created = None;
        assert!(assign_case(&half, 8, 2).is_err());
    }

    #[test]
    fn recent_flips_to_old_as_corpus_grows() {
        let t = loose(10);
        let cases: Vec<Case> = (10..60).map(|f| assign_case(&t, f, 26).unwrap()).collect();
        let flip = cases.iter().position(|c| *c == Case::OOld).unwrap();
        assert_eq!(flip, 26);
        assert!(cases[flip..].iter().all(|c| *c == Case::OOld));
        assert!(cases[..flip].iter().all(|c| *c == Case::ORecent));
    }

    #[test]
    fn survival_of_zero_delays() {
        let s = survival_curve(&[0, 0, 0]).unwrap();
        assert_eq!(s.at(-1), 1.0);
        assert_eq!(s.at(0), 0.0);
        assert_eq!((s.p50, s.p75, s.p90, s.p95), (0, 0, 0, 0));
    }

    #[test]
    fn survival_of_one_to_four() {
        let s = survival_curve(&[1, 2, 3, 4]).unwrap();
        assert_eq!(s.at(2), 0.5);
        assert_eq!(s.p50, 2);
        assert_eq!(s.at(0), 1.0);
        assert_eq!(s.at(4), 0.0);
        assert!(s.steps.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn empty_delays_signal() {
        assert_eq!(survival_curve(&[]), Err(TaxonomyError::NoIntegrations));
        assert_eq!(compute_cutoff(&[], 0.9), Err(TaxonomyError::NoIntegrations));
    }

    #[test]
    fn cutoff_examples() {
        let ten: Vec<usize> = (1..=10).collect();
        assert_eq!(compute_cutoff(&ten, 0.9).unwrap().theta_delay, 9);
        assert_eq!(compute_cutoff(&[4, 4, 4, 4], 0.9).unwrap().theta_delay, 4);
        assert!(compute_cutoff(&ten, 1.0).is_err());
    }

    #[test]
    fn case_names_round_trip() {
        for c in Case::ALL {
            assert_eq!(c.as_str().parse::<Case>(), Ok(c));
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.as_str()));
        }
    }
}
