//! Synthetic desk-scale news streams with planted topics, precursors and background noise.
//!
//! Ground truth never enters [`Document`]; it is returned separately and written to a
//! sidecar CSV so the production path stays unaware of it.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, EmbeddingSet};
use crate::error::InputError;

fn default_sigma() -> f64 {
    1.0
}
fn default_separation() -> f64 {
    20.0
}
fn default_model_id() -> String {
    "synthetic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTopic {
    pub birth_day: u32,
    /// Documents per day starting at `birth_day`.
    pub arrivals: Vec<u32>,
    /// Days (strictly before `birth_day`) on which one precursor document is published.
    #[serde(default)]
    pub precursor_days: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub start_date: NaiveDate,
    /// Latest admissible day for any generated document. The corpus span itself always runs
    /// to the latest generated document.
    #[serde(default)]
    pub end_day: Option<u32>,
    pub dim: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Distance of each topic mean from the origin, in units of `sigma`.
    #[serde(default = "default_separation")]
    pub separation: f64,
    pub topics: Vec<PlantedTopic>,
    /// One background-noise document per listed day.
    #[serde(default)]
    pub noise_days: Vec<u32>,
    #[serde(default = "default_model_id")]
    pub model_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    Arrival,
    Precursor,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub doc_id: String,
    pub kind: TruthKind,
    pub topic: Option<usize>,
    pub day: u32,
    pub birth_day: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct SyntheticStream {
    pub corpus: Corpus,
    pub embeddings: EmbeddingSet,
    pub truth: Vec<GroundTruth>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), InputError> {
        let bad = |m: String| Err(InputError::Scenario(m));
        if self.topics.is_empty() {
            return bad("at least one planted topic is required".into());
        }
        if self.dim < self.topics.len() {
            return bad(format!(
                "dim {} cannot hold {} orthogonal topic means",
                self.dim,
                self.topics.len()
            ));
        }
        if !(self.sigma > 0.0) || !(self.separation > 0.0) {
            return bad("sigma and separation must be positive".into());
        }
        if self.document_count() == 0 {
            return bad("scenario produces zero documents".into());
        }
        for (k, t) in self.topics.iter().enumerate() {
            for &p in &t.precursor_days {
                if p >= t.birth_day {
                    return bad(format!("topic {k}: precursor day {p} is not before birth day {}", t.birth_day));
                }
                if let Some(end) = self.end_day {
                    if p > end {
                        return bad(format!("topic {k}: precursor day {p} is after corpus end {end}"));
                    }
                }
            }
            if let Some(end) = self.end_day {
                let last = t.birth_day as usize + t.arrivals.len();
                if t.arrivals.iter().any(|&c| c > 0) && last > end as usize + 1 {
                    return bad(format!("topic {k}: arrivals extend past corpus end {end}"));
                }
            }
        }
        if let Some(end) = self.end_day {
            if let Some(&d) = self.noise_days.iter().find(|&&d| d > end) {
                return bad(format!("noise day {d} is after corpus end {end}"));
            }
        }
        Ok(())
    }

    pub fn document_count(&self) -> usize {
        let topical: usize = self
            .topics
            .iter()
            .map(|t| t.arrivals.iter().map(|&c| c as usize).sum::<usize>() + t.precursor_days.len())
            .sum();
        topical + self.noise_days.len()
    }

    fn topic_mean(&self, k: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        m[k] = self.separation * self.sigma;
        m
    }
}

struct Planned {
    doc_id: String,
    day: u32,
    kind: TruthKind,
    topic: Option<usize>,
}

fn plan(spec: &ScenarioSpec) -> Vec<Planned> {
    let mut out = Vec::with_capacity(spec.document_count());
    for (k, t) in spec.topics.iter().enumerate() {
        for (i, &day) in t.precursor_days.iter().enumerate() {
            out.push(Planned {
                doc_id: format!("t{k}-pre-{i:03}"),
                day,
                kind: TruthKind::Precursor,
                topic: Some(k),
            });
        }
        let mut n = 0;
        for (offset, &count) in t.arrivals.iter().enumerate() {
            for _ in 0..count {
                out.push(Planned {
                    doc_id: format!("t{k}-arr-{n:04}"),
                    day: t.birth_day + offset as u32,
                    kind: TruthKind::Arrival,
                    topic: Some(k),
                });
                n += 1;
            }
        }
    }
    for (i, &day) in spec.noise_days.iter().enumerate() {
        out.push(Planned {
            doc_id: format!("noise-{i:03}"),
            day,
            kind: TruthKind::Noise,
            topic: None,
        });
    }
    out
}

fn sample_noise(
    spec: &ScenarioSpec,
    rng: &mut ChaCha8Rng,
    placed: &[Vec<f64>],
) -> Result<Vec<f64>, InputError> {
    let scale = spec.separation * spec.sigma;
    // topic means sit sqrt(2) * scale apart; noise must only meet a topic after topics meet each other
    let min_gap = 2.0 * scale;
    let extent = 3.0 * scale;
    let means: Vec<Vec<f64>> = (0..spec.topics.len()).map(|k| spec.topic_mean(k)).collect();
    for _ in 0..100_000 {
        let v: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-extent..=extent)).collect();
        let far = means.iter().chain(placed).all(|m| euclid(m, &v) >= min_gap);
        if far {
            return Ok(v);
        }
    }
    Err(InputError::Scenario(
        "could not place noise documents far from topics; raise dim or reduce noise count".into(),
    ))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Builds a deterministic stream for `(spec, seed)`.
///
/// Topic `k` is an isotropic Gaussian around `separation * sigma * e_k`; precursors draw from the
/// same Gaussian. Noise documents are uniform in a box around the origin, rejected until they
/// lie at least `2 * separation * sigma` from every topic mean and every other noise document.
pub fn generate_synthetic_stream(spec: &ScenarioSpec, seed: u64) -> Result<SyntheticStream, InputError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, spec.sigma).expect("sigma validated positive");
    let planned = plan(spec);

    let mut vectors = BTreeMap::new();
    let mut noise_placed: Vec<Vec<f64>> = Vec::new();
    let mut documents = Vec::with_capacity(planned.len());
    let mut truth = Vec::with_capacity(planned.len());
    for p in &planned {
        let v = match p.topic {
            Some(k) => spec
                .topic_mean(k)
                .into_iter()
                .map(|m| m + gauss.sample(&mut rng))
                .collect(),
            None => {
                let v = sample_noise(spec, &mut rng, &noise_placed)?;
                noise_placed.push(v.clone());
                v
            }
        };
        vectors.insert(p.doc_id.clone(), v);
        let published_at = spec.start_date + chrono::Days::new(p.day as u64);
        let (title, description) = match (p.kind, p.topic) {
            (TruthKind::Noise, _) => ("background item".to_string(), "unrelated story".to_string()),
            (kind, Some(k)) => (format!("topic {k} story"), format!("{kind:?} document for topic {k}")),
            (_, None) => unreachable!("topical documents carry a topic"),
        };
        documents.push(Document {
            doc_id: p.doc_id.clone(),
            published_at,
            title,
            description,
            source_url: None,
        });
        truth.push(GroundTruth {
            doc_id: p.doc_id.clone(),
            kind: p.kind,
            topic: p.topic,
            day: p.day,
            birth_day: p.topic.map(|k| spec.topics[k].birth_day),
        });
    }
    truth.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let corpus = Corpus::from_documents(documents)?;
    Ok(SyntheticStream {
        corpus,
        embeddings: EmbeddingSet {
            model_id: spec.model_id.clone(),
            dim: spec.dim,
            vectors,
        },
        truth,
    })
}

pub fn write_ground_truth(truth: &[GroundTruth], path: impl AsRef<Path>) -> Result<(), InputError> {
    let path = path.as_ref();
    let to_io = |e: csv::Error| InputError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    for t in truth {
        w.serialize(t).map_err(to_io)?;
    }
    w.flush().map_err(|e| InputError::io(path, e))
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>, InputError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| InputError::io(path, e.into()))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| InputError::Malformed {
                path: path.to_path_buf(),
                line: i + 2,
                reason: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_topic() -> ScenarioSpec {
        ScenarioSpec {
            start_date: NaiveDate::from_ymd_opt(2025, 3, 20).unwrap(),
            end_day: None,
            dim: 3,
            sigma: 1.0,
            separation: 20.0,
            topics: vec![PlantedTopic {
                birth_day: 5,
                arrivals: vec![3; 5],
                precursor_days: vec![1, 3],
            }],
            noise_days: vec![0, 2, 4, 6],
            model_id: "synthetic".into(),
        }
    }

    #[test]
    fn document_count_and_windows() {
        let s = generate_synthetic_stream(&one_topic(), 1).unwrap();
        assert_eq!(s.corpus.len(), 21);
        // latest arrival is day 9
        assert_eq!(s.corpus.timeline().num_windows(), 10);
        assert_eq!(s.truth.len(), 21);
        assert_eq!(s.truth.iter().filter(|t| t.kind == TruthKind::Precursor).count(), 2);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_synthetic_stream(&one_topic(), 42).unwrap();
        let b = generate_synthetic_stream(&one_topic(), 42).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.embeddings, b.embeddings);
        let c = generate_synthetic_stream(&one_topic(), 43).unwrap();
        assert_eq!(a.corpus, c.corpus);
        assert_ne!(a.embeddings, c.embeddings);
    }

    #[test]
    fn rejects_empty_and_late_precursor() {
        let mut spec = one_topic();
        spec.topics[0].arrivals = vec![];
        spec.topics[0].precursor_days.clear();
        spec.noise_days.clear();
        assert!(matches!(generate_synthetic_stream(&spec, 0), Err(InputError::Scenario(_))));

        let mut spec = one_topic();
        spec.end_day = Some(2);
        spec.topics[0].birth_day = 5;
        spec.topics[0].precursor_days = vec![3];
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("after corpus end"), "{err}");

        let mut spec = one_topic();
        spec.topics[0].precursor_days = vec![6];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn noise_is_far_from_topic_means() {
        let spec = one_topic();
        let s = generate_synthetic_stream(&spec, 9).unwrap();
        let mean = spec.topic_mean(0);
        for t in s.truth.iter().filter(|t| t.kind == TruthKind::Noise) {
            assert!(euclid(&s.embeddings.vectors[&t.doc_id], &mean) >= 40.0);
        }
    }

    #[test]
    fn truth_sidecar_round_trips() {
        let s = generate_synthetic_stream(&one_topic(), 3).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_ground_truth(&s.truth, f.path()).unwrap();
        assert_eq!(read_ground_truth(f.path()).unwrap(), s.truth);
    }
}
