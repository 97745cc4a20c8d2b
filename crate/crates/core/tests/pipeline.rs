mod common;

use std::collections::BTreeMap;

use newstraj::cluster::Algorithm;
use newstraj::error::PipelineError;
use newstraj::pipeline::output::{read_trajectories, ConfigOutcome, Manifest, MANIFEST};
use newstraj::pipeline::{load_run, regenerate_report, run_pipeline, synthesize, truth_path, ReportKind, RunOptions};
use newstraj::reduce::TargetDim;
use newstraj::synth::{read_ground_truth, TruthKind};
use newstraj::taxonomy::Case;

use common::*;

fn run(cfg: &newstraj::config::RunConfig, jobs: usize) -> newstraj::pipeline::RunSummary {
    run_pipeline(
        cfg,
        &RunOptions {
            jobs: Some(jobs),
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn planted_topics_recovered_against_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), planted_spec(), &["synthetic"]);
    synthesize(&cfg).unwrap();
    let truth = read_ground_truth(truth_path(&cfg.corpus_path)).unwrap();
    let summary = run(&cfg, 2);
    assert_eq!(summary.failed(), 0);
    assert_eq!(summary.runs.len(), 2);

    // window 0 is the first publication day
    let first_day = 2;
    for r in &summary.runs {
        let by_id: BTreeMap<_, _> = r.records.iter().map(|x| (x.trajectory.doc_id.as_str(), x)).collect();
        for t in &truth {
            let rec = by_id[t.doc_id.as_str()];
            match t.kind {
                TruthKind::Precursor => {
                    assert!(rec.case.is_anticipatory(), "{} -> {}", t.doc_id, rec.case);
                    let tr = &rec.trajectory;
                    let anticipation = tr.topic_created.unwrap() - tr.appearance;
                    assert_eq!(anticipation as u32, t.birth_day.unwrap() - t.day);
                    assert_eq!(tr.topic_created.unwrap() as u32 + first_day, t.birth_day.unwrap());
                }
                TruthKind::Arrival => assert!(matches!(rec.case, Case::TFirst | Case::TLate), "{}", t.doc_id),
                TruthKind::Noise => assert!(matches!(rec.case, Case::ORecent | Case::OOld), "{}", t.doc_id),
            }
        }
    }
    let cases = |i: usize| summary.runs[i].records.iter().map(|r| r.case).collect::<Vec<_>>();
    assert_eq!(summary.runs[0].key.algorithm, Algorithm::Hdbscan);
    assert_eq!(cases(0), cases(1));
}

#[test]
fn one_topic_scenario_with_dbscan() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), one_topic_spec(), &["m"]);
    cfg.algorithms = vec![Algorithm::Dbscan];
    synthesize(&cfg).unwrap();
    let truth = read_ground_truth(truth_path(&cfg.corpus_path)).unwrap();
    let summary = run(&cfg, 1);
    let records = &summary.runs[0].records;
    for t in &truth {
        let rec = records.iter().find(|r| r.trajectory.doc_id == t.doc_id).unwrap();
        match t.kind {
            TruthKind::Precursor => assert!(rec.case.is_anticipatory()),
            TruthKind::Arrival => assert!(matches!(rec.case, Case::TFirst | Case::TLate)),
            TruthKind::Noise => assert!(matches!(rec.case, Case::ORecent | Case::OOld)),
        }
    }
}

#[test]
fn grid_arithmetic_and_manifest_completeness() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), planted_spec(), &["alpha", "beta"]);
    cfg.target_dims = vec![TargetDim::AsProvided, TargetDim::Dim(2)];
    cfg.algorithms = vec![Algorithm::Hdbscan];
    cfg.theta_align_values = vec![0.3, 0.5];
    synthesize(&cfg).unwrap();
    let summary = run(&cfg, 3);
    assert_eq!(summary.manifest.configurations.len(), 8);
    assert_eq!(summary.failed(), 0);

    let out = &cfg.output_dir;
    let dumps: Vec<_> = summary
        .manifest
        .artifacts
        .iter()
        .filter(|a| a.path.ends_with("/trajectories.csv"))
        .collect();
    assert_eq!(dumps.len(), 8);
    assert!(dumps.iter().all(|a| a.fingerprint.is_some()));
    let survival: Vec<_> = summary.manifest.artifacts.iter().filter(|a| a.path.starts_with("survival/")).collect();
    assert_eq!(survival.len(), 1);

    let listed: Vec<String> = summary.manifest.artifacts.iter().map(|a| a.path.clone()).collect();
    let on_disk: Vec<String> = snapshot(out)
        .into_iter()
        .map(|(p, _)| p.to_string_lossy().replace('\\', "/"))
        .filter(|p| p != MANIFEST)
        .collect();
    assert_eq!(listed, on_disk);
    for a in &summary.manifest.artifacts {
        let bytes = std::fs::read(out.join(&a.path)).unwrap();
        use sha2::Digest;
        assert_eq!(a.sha256, hex::encode(sha2::Sha256::digest(&bytes)));
    }

    // fingerprint is embedded in every per-configuration CSV row
    let c = &summary.manifest.configurations[0];
    let text = std::fs::read_to_string(out.join(c.dir.as_ref().unwrap()).join("trajectories.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(&c.fingerprint)));
}

#[test]
fn rerun_is_byte_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), planted_spec(), &["alpha", "beta"]);
    cfg.target_dims = vec![TargetDim::AsProvided, TargetDim::Dim(2)];
    cfg.theta_align_values = vec![0.2, 0.4];
    synthesize(&cfg).unwrap();
    run(&cfg, 1);
    let a = snapshot(&cfg.output_dir);
    run(&cfg, 4);
    let b = snapshot(&cfg.output_dir);
    assert_eq!(a, b);
}

#[test]
fn failing_configuration_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), planted_spec(), &["synthetic"]);
    // 5 > the 3 source dimensions
    cfg.target_dims = vec![TargetDim::AsProvided, TargetDim::Dim(5)];
    cfg.algorithms = vec![Algorithm::Dbscan];
    synthesize(&cfg).unwrap();
    let summary = run(&cfg, 2);
    assert_eq!(summary.failed(), 1);
    let failed = summary
        .manifest
        .configurations
        .iter()
        .find(|c| c.status == ConfigOutcome::Failed)
        .unwrap();
    assert_eq!(failed.target_dim, TargetDim::Dim(5));
    assert!(failed.error.as_ref().unwrap().contains("exceeds"), "{:?}", failed.error);
    assert!(failed.dir.is_none());

    // the surviving configuration matches a run without the failing one
    let ok_dir = summary.manifest.configurations.iter().find(|c| c.status == ConfigOutcome::Ok).unwrap();
    let with_failure = std::fs::read(cfg.output_dir.join(ok_dir.dir.as_ref().unwrap()).join("trajectories.csv")).unwrap();
    cfg.target_dims = vec![TargetDim::AsProvided];
    run(&cfg, 1);
    let alone = std::fs::read(cfg.output_dir.join(ok_dir.dir.as_ref().unwrap()).join("trajectories.csv")).unwrap();
    assert_eq!(with_failure, alone);
}

#[test]
fn plot_data_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), planted_spec(), &["alpha", "beta", "gamma"]);
    synthesize(&cfg).unwrap();
    run(&cfg, 2);
    let plots = cfg.output_dir.join("plots");
    let rows = |name: &str| -> Vec<csv::StringRecord> {
        csv::Reader::from_path(plots.join(name)).unwrap().records().map(Result::unwrap).collect()
    };

    let daily = rows("daily_counts.csv");
    let total: usize = daily.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(total, planted_spec().document_count());
    assert_eq!(daily.last().unwrap()[3].parse::<usize>().unwrap(), total);

    let surv = rows("survival.csv");
    assert_eq!(&surv[0][0], "0");
    let s0: f64 = surv[0][1].parse().unwrap();
    assert!((0.0..=1.0).contains(&s0));

    let consensus = rows("consensus.csv");
    let by_model: Vec<_> = consensus.iter().filter(|r| &r[0] == "by_model").collect();
    assert!(!by_model.is_empty());
    let mut groups: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for r in &by_model {
        groups.entry(&r[1]).or_default().push((r[2].parse().unwrap(), r[3].parse().unwrap()));
    }
    for pts in groups.values() {
        assert_eq!(pts.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(pts.windows(2).all(|w| w[1].1 <= w[0].1));
    }
}

#[test]
fn report_subcommands_reuse_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), planted_spec(), &["alpha", "beta"]);
    let missing = regenerate_report(&cfg, ReportKind::Agreement, &[]);
    assert!(matches!(missing, Err(PipelineError::MissingArtifact(_))));

    synthesize(&cfg).unwrap();
    let summary = run(&cfg, 2);
    let before = snapshot(&cfg.output_dir);
    for kind in [ReportKind::Survival, ReportKind::Agreement, ReportKind::PlotData] {
        regenerate_report(&cfg, kind, &[]).unwrap();
    }
    assert_eq!(before, snapshot(&cfg.output_dir));

    let (_, runs) = load_run(&cfg.output_dir, &["|dbscan|".into()]).unwrap();
    assert_eq!(runs.len(), 2);
    let original = summary.runs.iter().find(|r| r.fingerprint == runs[0].fingerprint).unwrap();
    assert_eq!(original.records, runs[0].records);

    let c = &summary.manifest.configurations[0];
    std::fs::remove_file(cfg.output_dir.join(c.dir.as_ref().unwrap()).join("trajectories.csv")).unwrap();
    assert!(matches!(
        regenerate_report(&cfg, ReportKind::Survival, &[]),
        Err(PipelineError::MissingArtifact(_))
    ));
    assert!(read_trajectories(&cfg.output_dir.join("nope.csv")).is_err());
    assert!(Manifest::load(dir.path()).is_err());
}
