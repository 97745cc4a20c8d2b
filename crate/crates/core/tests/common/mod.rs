#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use newstraj::cluster::{Algorithm, DbscanParams, HdbscanParams};
use newstraj::config::{DelayScope, RunConfig, SCHEMA_VERSION};
use newstraj::reduce::TargetDim;
use newstraj::synth::{PlantedTopic, ScenarioSpec};

pub const BIRTH: u32 = 20;

/// Two topics born the same day, three precursors each, five noise documents.
pub fn planted_spec() -> ScenarioSpec {
    ScenarioSpec {
        start_date: NaiveDate::from_ymd_opt(2024, 3, 1).unwrap(),
        end_day: None,
        dim: 3,
        sigma: 1.0,
        separation: 20.0,
        topics: vec![
            PlantedTopic {
                birth_day: BIRTH,
                arrivals: vec![6, 3, 3, 3, 3],
                precursor_days: vec![5, 12, 18],
            },
            PlantedTopic {
                birth_day: BIRTH,
                arrivals: vec![6, 3, 3, 3, 3],
                precursor_days: vec![6, 10, 17],
            },
        ],
        noise_days: vec![2, 9, 21, 30, 40],
        model_id: "synthetic".into(),
    }
}

pub fn one_topic_spec() -> ScenarioSpec {
    ScenarioSpec {
        topics: vec![PlantedTopic {
            birth_day: BIRTH,
            arrivals: vec![6, 2, 2, 2],
            precursor_days: vec![5, 12, 18],
        }],
        noise_days: vec![2, 9, 21, 30],
        dim: 4,
        ..planted_spec()
    }
}

/// Config rooted at `dir` with one embedding file per model, scenario attached.
pub fn config(dir: &Path, spec: ScenarioSpec, models: &[&str]) -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        corpus_path: dir.join("corpus.jsonl"),
        embeddings: models
            .iter()
            .map(|m| (m.to_string(), dir.join(format!("{m}.jsonl"))))
            .collect(),
        target_dims: vec![TargetDim::AsProvided],
        algorithms: vec![Algorithm::Hdbscan, Algorithm::Dbscan],
        theta_align_values: vec![0.3],
        delay_percentile: 0.9,
        delay_scope: DelayScope::PerRun,
        theta_delay_override: None,
        theta_delay_fallback: None,
        seed: 11,
        output_dir: dir.join("out"),
        jobs: None,
        hdbscan: HdbscanParams::default(),
        dbscan: Some(DbscanParams { eps: 6.0, min_pts: 4 }),
        synthetic: Some(spec),
    }
}

/// Every file under `root` as `(relative path, bytes)`, sorted.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
