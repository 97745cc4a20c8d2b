//! Document ingestion, daily window bookkeeping and embedding files.
//!
//! Corpus files are UTF-8 JSON lines, one document per line:
//!
//! ```text
//! {"doc_id": "a1", "published_at": "2025-03-20", "title": "...", "description": "...", "source_url": null}
//! ```
//!
//! Embedding files are either JSON lines (`{"doc_id": "a1", "vector": [0.1, ...]}`, with an
//! optional leading `{"header": {...}}` line) or the little-endian binary layout
//! `"TTEMB1" | u32 dim | u64 count | (u16 id_len | id bytes | dim x f32)*`.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::InputError;

pub const BINARY_MAGIC: &[u8; 6] = b"TTEMB1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub published_at: NaiveDate,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

/// Span of the corpus in days. Window `w` holds every document published on or before
/// `first_day + w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusTimeline {
    pub first_day: NaiveDate,
    pub final_day: NaiveDate,
}

impl CorpusTimeline {
    pub fn num_windows(&self) -> usize {
        (self.final_day - self.first_day).num_days() as usize + 1
    }

    /// Index of the final window (`T_final`).
    pub fn final_window(&self) -> usize {
        self.num_windows() - 1
    }

    /// Window in which a document published on `day` first appears.
    pub fn window_of(&self, day: NaiveDate) -> usize {
        (day - self.first_day).num_days() as usize
    }

    pub fn day_of(&self, window: usize) -> NaiveDate {
        self.first_day + chrono::Days::new(window as u64)
    }
}

/// Validated, sorted document collection with its timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    timeline: CorpusTimeline,
}

impl Corpus {
    /// Sorts by `(published_at, doc_id)` and rejects duplicates and empty input.
    pub fn from_documents(mut documents: Vec<Document>) -> Result<Self, InputError> {
        if documents.is_empty() {
            return Err(InputError::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(InputError::DuplicateId(doc.doc_id.clone()));
            }
        }
        documents.sort_by(|a, b| {
            (a.published_at, &a.doc_id).cmp(&(b.published_at, &b.doc_id))
        });
        let timeline = CorpusTimeline {
            first_day: documents[0].published_at,
            final_day: documents[documents.len() - 1].published_at,
        };
        Ok(Corpus {
            documents,
            timeline,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn timeline(&self) -> CorpusTimeline {
        self.timeline
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Window of first appearance for each document, in corpus order.
    pub fn appearance_windows(&self) -> Vec<usize> {
        self.documents
            .iter()
            .map(|d| self.timeline.window_of(d.published_at))
            .collect()
    }

    /// Indices (into [`Corpus::documents`]) of the documents in cumulative window `w`.
    pub fn window_members(&self, w: usize) -> Vec<usize> {
        let cutoff = self.timeline.day_of(w);
        // documents are date-sorted, so membership is a prefix
        let end = self.documents.partition_point(|d| d.published_at <= cutoff);
        (0..end).collect()
    }

    /// Per-day and cumulative document counts, one entry per window.
    pub fn daily_counts(&self) -> Vec<(NaiveDate, usize, usize)> {
        let mut counts = vec![0usize; self.timeline.num_windows()];
        for d in &self.documents {
            counts[self.timeline.window_of(d.published_at)] += 1;
        }
        let mut cumulative = 0;
        counts
            .into_iter()
            .enumerate()
            .map(|(w, c)| {
                cumulative += c;
                (self.timeline.day_of(w), c, cumulative)
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: String,
    published_at: String,
    title: String,
    description: String,
    #[serde(default)]
    source_url: Option<String>,
}

/// Accepts a plain date or a full timestamp; timestamps are truncated to their date.
pub fn parse_day(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.date_naive());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.date());
        }
    }
    None
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, InputError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| InputError::io(path, e))?;
    let mut documents = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| InputError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| InputError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let raw: RawDocument = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let published_at = parse_day(&raw.published_at)
            .ok_or_else(|| malformed(format!("unparseable published_at `{}`", raw.published_at)))?;
        if raw.doc_id.is_empty() {
            return Err(malformed("empty doc_id".into()));
        }
        documents.push(Document {
            doc_id: raw.doc_id,
            published_at,
            title: raw.title,
            description: raw.description,
            source_url: raw.source_url,
        });
    }
    Corpus::from_documents(documents)
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), InputError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| InputError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in corpus.documents() {
        let line = serde_json::to_string(doc).expect("documents always serialize");
        writeln!(out, "{line}").map_err(|e| InputError::io(path, e))?;
    }
    out.flush().map_err(|e| InputError::io(path, e))
}

/// One model's document vectors, keyed by doc_id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub model_id: String,
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingSet {
    /// Checks completeness against the corpus plus dimension and finiteness invariants.
    pub fn validate(&self, corpus: &Corpus) -> Result<(), InputError> {
        let known: HashSet<&str> = corpus.documents().iter().map(|d| d.doc_id.as_str()).collect();
        for (id, v) in &self.vectors {
            if !known.contains(id.as_str()) {
                return Err(InputError::UnknownDoc(id.clone()));
            }
            if v.len() != self.dim {
                return Err(InputError::InconsistentDim {
                    doc_id: id.clone(),
                    expected: self.dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(InputError::NonFinite(id.clone()));
            }
        }
        for doc in corpus.documents() {
            if !self.vectors.contains_key(&doc.doc_id) {
                return Err(InputError::MissingVector(doc.doc_id.clone()));
            }
        }
        Ok(())
    }

    /// Vectors in corpus order.
    pub fn rows(&self, corpus: &Corpus) -> Vec<Vec<f64>> {
        corpus
            .documents()
            .iter()
            .map(|d| self.vectors[&d.doc_id].clone())
            .collect()
    }
}

#[derive(Deserialize)]
struct RawVector {
    doc_id: String,
    vector: Vec<Option<f64>>,
}

/// Loads a JSON-lines or binary embedding file and validates it against `corpus`.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    model_id: &str,
    corpus: &Corpus,
) -> Result<EmbeddingSet, InputError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| InputError::io(path, e))?;
    let set = if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(path, &bytes, model_id)?
    } else {
        parse_jsonl(path, &bytes, model_id)?
    };
    set.validate(corpus)?;
    Ok(set)
}

fn insert_vector(
    vectors: &mut BTreeMap<String, Vec<f64>>,
    dim: &mut Option<usize>,
    doc_id: String,
    vector: Vec<f64>,
) -> Result<(), InputError> {
    match *dim {
        None => *dim = Some(vector.len()),
        Some(d) if d != vector.len() => {
            return Err(InputError::InconsistentDim {
                doc_id,
                expected: d,
                found: vector.len(),
            })
        }
        _ => {}
    }
    if vector.iter().any(|x| !x.is_finite()) {
        return Err(InputError::NonFinite(doc_id));
    }
    if vectors.contains_key(&doc_id) {
        return Err(InputError::DuplicateId(doc_id));
    }
    vectors.insert(doc_id, vector);
    Ok(())
}

fn parse_jsonl(path: &Path, bytes: &[u8], model_id: &str) -> Result<EmbeddingSet, InputError> {
    let text = std::str::from_utf8(bytes).map_err(|e| InputError::Malformed {
        path: path.to_path_buf(),
        line: 0,
        reason: format!("not UTF-8: {e}"),
    })?;
    let mut vectors = BTreeMap::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| InputError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if value.get("header").is_some() && value.get("doc_id").is_none() {
            continue;
        }
        let raw: RawVector = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        // JSON has no NaN literal; nulls stand in for non-finite values
        let vector = raw.vector.iter().map(|x| x.unwrap_or(f64::NAN)).collect();
        insert_vector(&mut vectors, &mut dim, raw.doc_id, vector)?;
    }
    Ok(EmbeddingSet {
        model_id: model_id.to_string(),
        dim: dim.unwrap_or(0),
        vectors,
    })
}

fn parse_binary(path: &Path, bytes: &[u8], model_id: &str) -> Result<EmbeddingSet, InputError> {
    let truncated = || InputError::Malformed {
        path: path.to_path_buf(),
        line: 0,
        reason: "truncated binary embedding file".into(),
    };
    let mut cursor = BINARY_MAGIC.len();
    let mut take = |n: usize| -> Result<&[u8], InputError> {
        let slice = bytes.get(cursor..cursor + n).ok_or_else(truncated)?;
        cursor += n;
        Ok(slice)
    };
    let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let mut vectors = BTreeMap::new();
    let mut seen_dim = Some(dim);
    for _ in 0..count {
        let id_len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(take(id_len)?)
            .map_err(|e| InputError::Malformed {
                path: path.to_path_buf(),
                line: 0,
                reason: format!("doc_id not UTF-8: {e}"),
            })?
            .to_string();
        let raw = take(dim * 4)?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        insert_vector(&mut vectors, &mut seen_dim, id, vector)?;
    }
    Ok(EmbeddingSet {
        model_id: model_id.to_string(),
        dim,
        vectors,
    })
}

/// Writes vectors as JSON lines sorted by doc_id, preceded by a header line.
pub fn write_embeddings_jsonl(
    model_id: &str,
    dim_label: &str,
    vectors: &BTreeMap<String, Vec<f64>>,
    path: impl AsRef<Path>,
) -> Result<(), InputError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| InputError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = serde_json::json!({ "header": { "model_id": model_id, "dim": dim_label } });
    let io = |e| InputError::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for (id, v) in vectors {
        let line = serde_json::json!({ "doc_id": id, "vector": v });
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes the binary layout; values are narrowed to f32.
pub fn write_embeddings_binary(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<(), InputError> {
    let path = path.as_ref();
    let io = |e| InputError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(BINARY_MAGIC).map_err(io)?;
    out.write_all(&(set.dim as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(set.vectors.len() as u64).to_le_bytes()).map_err(io)?;
    for (id, v) in &set.vectors {
        out.write_all(&(id.len() as u16).to_le_bytes()).map_err(io)?;
        out.write_all(id.as_bytes()).map_err(io)?;
        for x in v {
            out.write_all(&(*x as f32).to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
