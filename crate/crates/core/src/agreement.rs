//! Label robustness across raters (embedding models, or dimensionalities of one model).

use std::collections::{BTreeMap, HashMap};

use serde::{Serialize, Serializer};

use crate::error::AgreementError;
use crate::taxonomy::{Case, TrajectoryRecord};

pub const TOA: &str = "TOA";
pub const NOT_TOA: &str = "not-TOA";
pub const NEVER: &str = "inf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// TOA vs every other case
    CaseBinaryToa,
    /// all seven cases
    CaseFull,
    /// integration delay in days, `inf` when never integrated
    Delay,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::CaseBinaryToa, Task::CaseFull, Task::Delay];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::CaseBinaryToa => "case_binary_toa",
            Task::CaseFull => "case_full",
            Task::Delay => "delay",
        }
    }

    pub fn label(&self, record: &TrajectoryRecord) -> String {
        match self {
            Task::CaseBinaryToa => if record.case.is_anticipatory() { TOA } else { NOT_TOA }.to_string(),
            Task::CaseFull => record.case.as_str().to_string(),
            Task::Delay => record.delay().map_or_else(|| NEVER.to_string(), |d| d.to_string()),
        }
    }
}

/// Documents x raters grid of categorical labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub docs: Vec<String>,
    pub raters: Vec<String>,
    /// `labels[doc][rater]`
    pub labels: Vec<Vec<String>>,
}

impl LabelMatrix {
    pub fn new(docs: Vec<String>, raters: Vec<String>, labels: Vec<Vec<String>>) -> Result<Self, AgreementError> {
        if docs.is_empty() || labels.len() != docs.len() {
            return Err(AgreementError::NoDocuments);
        }
        for (row, l) in labels.iter().enumerate() {
            if l.len() != raters.len() {
                return Err(AgreementError::RaggedRow {
                    row,
                    expected: raters.len(),
                    found: l.len(),
                });
            }
        }
        Ok(LabelMatrix { docs, raters, labels })
    }

    /// One column per rater; documents sorted by doc_id. Every rater must label the same docs.
    pub fn from_records(task: Task, raters: &[(String, Vec<TrajectoryRecord>)]) -> Result<Self, AgreementError> {
        let first = raters.first().ok_or(AgreementError::TooFewRaters { needed: 1, found: 0 })?;
        let mut docs: Vec<String> = first.1.iter().map(|r| r.trajectory.doc_id.clone()).collect();
        docs.sort();
        let columns: Vec<HashMap<&str, String>> = raters
            .iter()
            .map(|(name, records)| {
                let col: HashMap<&str, String> = records
                    .iter()
                    .map(|r| (r.trajectory.doc_id.as_str(), task.label(r)))
                    .collect();
                if col.len() != docs.len() || docs.iter().any(|d| !col.contains_key(d.as_str())) {
                    return Err(AgreementError::IncompleteRater(name.clone()));
                }
                Ok(col)
            })
            .collect::<Result<_, _>>()?;
        let labels = docs
            .iter()
            .map(|d| columns.iter().map(|c| c[d.as_str()].clone()).collect())
            .collect();
        LabelMatrix::new(docs, raters.iter().map(|r| r.0.clone()).collect(), labels)
    }

    pub fn num_raters(&self) -> usize {
        self.raters.len()
    }

    /// Per-document label counts over a shared category index.
    fn counts(&self) -> (Vec<String>, Vec<Vec<usize>>) {
        let mut alphabet: Vec<String> = self.labels.iter().flatten().cloned().collect();
        alphabet.sort();
        alphabet.dedup();
        let index: HashMap<&str, usize> = alphabet.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let counts = self
            .labels
            .iter()
            .map(|row| {
                let mut c = vec![0usize; alphabet.len()];
                for l in row {
                    c[index[l.as_str()]] += 1;
                }
                c
            })
            .collect();
        (alphabet, counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    Value(f64),
    /// Every rating in the matrix is the same label, so chance agreement is 1.
    Degenerate,
}

impl Kappa {
    pub fn value(&self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(*v),
            Kappa::Degenerate => None,
        }
    }
}

impl Serialize for Kappa {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Kappa::Value(v) => s.serialize_f64(*v),
            Kappa::Degenerate => s.serialize_str("degenerate"),
        }
    }
}

/// Fleiss' kappa: `(P_bar - P_e) / (1 - P_e)`.
pub fn fleiss_kappa(matrix: &LabelMatrix) -> Result<Kappa, AgreementError> {
    let m = matrix.num_raters();
    if m < 2 {
        return Err(AgreementError::TooFewRaters { needed: 2, found: m });
    }
    let (alphabet, counts) = matrix.counts();
    let d = counts.len() as f64;
    let mf = m as f64;
    let p_bar = counts
        .iter()
        .map(|row| row.iter().map(|&n| (n * n.saturating_sub(1)) as f64).sum::<f64>() / (mf * (mf - 1.0)))
        .sum::<f64>()
        / d;
    let p_e: f64 = (0..alphabet.len())
        .map(|k| {
            let p = counts.iter().map(|row| row[k]).sum::<usize>() as f64 / (d * mf);
            p * p
        })
        .sum();
    if alphabet.len() <= 1 {
        return Ok(Kappa::Degenerate);
    }
    Ok(Kappa::Value((p_bar - p_e) / (1.0 - p_e)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorityAgreement {
    pub overall: f64,
    /// Sorted by doc_id.
    pub per_doc: BTreeMap<String, f64>,
}

/// Mean over documents of the largest share of raters agreeing on one label.
pub fn majority_agreement(matrix: &LabelMatrix) -> Result<MajorityAgreement, AgreementError> {
    let m = matrix.num_raters();
    if m == 0 {
        return Err(AgreementError::TooFewRaters { needed: 1, found: 0 });
    }
    let (_, counts) = matrix.counts();
    let per_doc: BTreeMap<String, f64> = matrix
        .docs
        .iter()
        .zip(&counts)
        .map(|(doc, row)| (doc.clone(), *row.iter().max().expect("non-empty row") as f64 / m as f64))
        .collect();
    let overall = per_doc.values().sum::<f64>() / per_doc.len() as f64;
    Ok(MajorityAgreement { overall, per_doc })
}

/// `fraction(N)` of documents where at least `N` raters give `target`, for `N = 1..=M`.
pub fn consensus_curve(matrix: &LabelMatrix, target: &str) -> Vec<(usize, f64)> {
    let d = matrix.docs.len() as f64;
    let hits: Vec<usize> = matrix
        .labels
        .iter()
        .map(|row| row.iter().filter(|l| l.as_str() == target).count())
        .collect();
    (1..=matrix.num_raters())
        .map(|n| (n, hits.iter().filter(|&&h| h >= n).count() as f64 / d))
        .collect()
}

/// `|TOA| / |docs with an outlier phase|`.
pub fn toa_share(cases: &[Case]) -> Result<f64, AgreementError> {
    let outlier_phase = cases.iter().filter(|c| c.has_outlier_phase()).count();
    if outlier_phase == 0 {
        return Err(AgreementError::UndefinedShare);
    }
    let toa = cases.iter().filter(|c| c.is_anticipatory()).count();
    Ok(toa as f64 / outlier_phase as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaterShares {
    pub rater: String,
    pub counts: BTreeMap<String, usize>,
    pub fractions: BTreeMap<String, f64>,
    /// `None` when the rater has no outlier-phase documents.
    pub toa_share: Option<f64>,
}

pub fn case_shares(raters: &[(String, Vec<TrajectoryRecord>)]) -> Vec<RaterShares> {
    raters
        .iter()
        .map(|(rater, records)| {
            let cases: Vec<Case> = records.iter().map(|r| r.case).collect();
            let mut counts: BTreeMap<String, usize> = Case::ALL.iter().map(|c| (c.to_string(), 0)).collect();
            for c in &cases {
                *counts.get_mut(c.as_str()).expect("all cases present") += 1;
            }
            let n = cases.len().max(1) as f64;
            let fractions = counts.iter().map(|(k, &v)| (k.clone(), v as f64 / n)).collect();
            RaterShares {
                rater: rater.clone(),
                counts,
                fractions,
                toa_share: toa_share(&cases).ok(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub task: Task,
    pub raters: Vec<String>,
    pub num_docs: usize,
    pub kappa: Kappa,
    pub majority_agreement: f64,
    pub per_doc_ma: BTreeMap<String, f64>,
    pub consensus_target: Option<String>,
    pub consensus_curve: Vec<(usize, f64)>,
}

pub fn agreement_report(
    task: Task,
    raters: &[(String, Vec<TrajectoryRecord>)],
) -> Result<AgreementReport, AgreementError> {
    let matrix = LabelMatrix::from_records(task, raters)?;
    let kappa = fleiss_kappa(&matrix)?;
    let ma = majority_agreement(&matrix)?;
    let target = (task == Task::CaseBinaryToa).then(|| TOA.to_string());
    let curve = target.as_deref().map(|t| consensus_curve(&matrix, t)).unwrap_or_default();
    Ok(AgreementReport {
        task,
        raters: matrix.raters.clone(),
        num_docs: matrix.docs.len(),
        kappa,
        majority_agreement: ma.overall,
        per_doc_ma: ma.per_doc,
        consensus_target: target,
        consensus_curve: curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[&str]]) -> LabelMatrix {
        let m = rows[0].len();
        LabelMatrix::new(
            (0..rows.len()).map(|i| format!("d{i}")).collect(),
            (0..m).map(|j| format!("r{j}")).collect(),
            rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn worked_kappa() {
        let k = fleiss_kappa(&matrix(&[&["A", "A", "B"], &["B", "B", "A"]])).unwrap();
        assert!((k.value().unwrap() + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unanimous_kappa_is_one() {
        let k = fleiss_kappa(&matrix(&[&["A", "A", "A"], &["B", "B", "B"], &["A", "A", "A"]])).unwrap();
        assert_eq!(k, Kappa::Value(1.0));
    }

    #[test]
    fn single_label_is_degenerate() {
        let k = fleiss_kappa(&matrix(&[&["A", "A"], &["A", "A"]])).unwrap();
        assert_eq!(k, Kappa::Degenerate);
        assert_eq!(serde_json::to_string(&k).unwrap(), "\"degenerate\"");
    }

    #[test]
    fn kappa_needs_two_raters() {
        assert!(matches!(
            fleiss_kappa(&matrix(&[&["A"], &["B"]])),
            Err(AgreementError::TooFewRaters { .. })
        ));
    }

    #[test]
    fn majority_six_of_eleven() {
        let row: Vec<&str> = std::iter::repeat("A").take(6).chain(std::iter::repeat("B").take(5)).collect();
        let ma = majority_agreement(&matrix(&[&row])).unwrap();
        assert_eq!(ma.per_doc["d0"], 6.0 / 11.0);
        assert_eq!(ma.overall, 6.0 / 11.0);
        let unanimous = majority_agreement(&matrix(&[&["x", "x"], &["y", "y"]])).unwrap();
        assert_eq!(unanimous.overall, 1.0);
    }

    #[test]
    fn consensus_counts() {
        let row = |hits: usize| -> Vec<&str> {
            (0..11).map(|i| if i < hits { TOA } else { NOT_TOA }).collect()
        };
        let rows = [row(11), row(6), row(3), row(0)];
        let refs: Vec<&[&str]> = rows.iter().map(Vec::as_slice).collect();
        let curve = consensus_curve(&matrix(&refs), TOA);
        assert_eq!(curve.len(), 11);
        assert_eq!(curve[0], (1, 0.75));
        assert_eq!(curve[5], (6, 0.5));
        assert_eq!(curve[10], (11, 0.25));
        assert!(curve.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn toa_share_examples() {
        let cases = [Case::ToaFirst, Case::TodLate, Case::OOld, Case::TLate];
        assert!((toa_share(&cases).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(toa_share(&[Case::TLate, Case::TLate]), Err(AgreementError::UndefinedShare));
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = LabelMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["r0".into(), "r1".into()],
            vec![vec!["x".into(), "y".into()], vec!["x".into()]],
        );
        assert!(matches!(err, Err(AgreementError::RaggedRow { row: 1, .. })));
    }
}
