//! End-to-end runs over the sweep grid.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! manifest.json
//! configs/<slug>/{assignments.csv, topics.csv, trajectories.csv, summary.json}
//! survival/survival.json
//! agreement/{by_model,by_dim,by_algorithm}/<group>.json
//! tables/*.csv
//! plots/{daily_counts,survival,case_shares,toa_share,consensus}.csv
//! ```

pub mod output;
pub mod reports;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::align::{align_sequence, Alignment, AlignmentConfig};
use crate::cluster::{run_cumulative, Algorithm, CumulativeClustering, SilhouetteBand};
use crate::config::{DelayScope, RunConfig};
use crate::corpus::{load_corpus, load_embeddings, write_corpus, write_embeddings_jsonl, Corpus, EmbeddingSet};
use crate::error::{InputError, PipelineError, TaxonomyError};
use crate::reduce::{reduce_passthrough, reduce_pca, ReducedSet, TargetDim};
use crate::synth::{generate_synthetic_stream, write_ground_truth};
use crate::taxonomy::{
    assign_case, compute_cutoff, extract_trajectory, outlier_phase_delays, Case, Trajectory, TrajectoryRecord,
};

use output::{ConfigOutcome, ConfigStatus, Manifest, CONFIGS_DIR, TRAJECTORIES};
use reports::{all_group_reports, pooled_survival, View};

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigKey {
    pub model_id: String,
    pub target_dim: TargetDim,
    pub algorithm: Algorithm,
    pub theta_align: f64,
}

impl Eq for ConfigKey {}

impl Ord for ConfigKey {
    fn cmp(&self, o: &Self) -> Ordering {
        (&self.model_id, self.target_dim, self.algorithm)
            .cmp(&(&o.model_id, o.target_dim, o.algorithm))
            .then(self.theta_align.total_cmp(&o.theta_align))
    }
}

impl PartialOrd for ConfigKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl ConfigKey {
    pub fn theta_str(&self) -> String {
        format!("{:.2}", self.theta_align)
    }

    /// `model|dim|algo|theta|seed`
    pub fn fingerprint(&self, seed: u64) -> String {
        format!(
            "{}|{}|{}|{}|{seed}",
            self.model_id,
            self.target_dim,
            self.algorithm,
            self.theta_str()
        )
    }

    /// Directory name under `configs/`.
    pub fn slug(&self) -> String {
        sanitize(&format!(
            "{}__{}__{}__theta{}",
            self.model_id,
            self.target_dim,
            self.algorithm,
            self.theta_str()
        ))
    }
}

/// Replaces anything outside `[A-Za-z0-9._-]` with `_`.
pub fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

/// Cross product of the config lists, in model, dim, algorithm, theta order.
pub fn sweep_grid(cfg: &RunConfig) -> Vec<ConfigKey> {
    let mut grid = Vec::new();
    for model_id in cfg.embeddings.keys() {
        for &target_dim in &cfg.target_dims {
            for &algorithm in &cfg.algorithms {
                for &theta_align in &cfg.theta_align_values {
                    grid.push(ConfigKey {
                        model_id: model_id.clone(),
                        target_dim,
                        algorithm,
                        theta_align,
                    });
                }
            }
        }
    }
    grid
}

/// Empty filter list selects everything; otherwise any substring match selects.
pub fn matches_filters(fingerprint: &str, filters: &[String]) -> bool {
    filters.is_empty() || filters.iter().any(|f| fingerprint.contains(f.as_str()))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker pool width; `None` uses the config value, then rayon's default.
    pub jobs: Option<usize>,
    pub fingerprint_filters: Vec<String>,
}

/// Case-labelled trajectories of one successful configuration.
#[derive(Debug, Clone)]
pub struct RunRecords {
    pub key: ConfigKey,
    pub fingerprint: String,
    pub records: Vec<TrajectoryRecord>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub runs: Vec<RunRecords>,
}

impl RunSummary {
    pub fn failed(&self) -> usize {
        self.manifest
            .configurations
            .iter()
            .filter(|c| c.status == ConfigOutcome::Failed)
            .count()
    }
}

#[derive(Debug, Serialize)]
struct ConfigSummary<'a> {
    fingerprint: &'a str,
    model_id: &'a str,
    target_dim: TargetDim,
    reduced_dim: usize,
    algorithm: Algorithm,
    params: String,
    theta_align: f64,
    seed: u64,
    num_windows: usize,
    num_topics: usize,
    continued_links: usize,
    silhouette_mean: Option<f64>,
    silhouette_median: Option<f64>,
    silhouette_band: Option<SilhouetteBand>,
    silhouettes: &'a [Option<f64>],
    theta_delay: Option<usize>,
    theta_delay_source: Option<&'a str>,
    case_counts: BTreeMap<&'static str, usize>,
}

/// Everything computed for one configuration before case assignment.
struct Traced {
    reduced_dim: usize,
    clustering: std::sync::Arc<CumulativeClustering>,
    alignment: Alignment,
    trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, Copy)]
struct Cutoff {
    theta_delay: Option<usize>,
    source: Option<&'static str>,
}

fn pool(jobs: Option<usize>) -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    b.build().expect("thread pool")
}

pub fn load_inputs(cfg: &RunConfig) -> Result<(Corpus, BTreeMap<String, EmbeddingSet>), InputError> {
    let corpus = load_corpus(&cfg.corpus_path)?;
    let mut embeddings = BTreeMap::new();
    for (model, path) in &cfg.embeddings {
        embeddings.insert(model.clone(), load_embeddings(path, model, &corpus)?);
    }
    Ok((corpus, embeddings))
}

fn reduce(emb: &EmbeddingSet, dim: TargetDim) -> Result<ReducedSet, PipelineError> {
    Ok(match dim {
        TargetDim::AsProvided => reduce_passthrough(emb),
        TargetDim::Dim(d) => reduce_pca(emb, d)?,
    })
}

fn trace(
    corpus: &Corpus,
    reduced: &ReducedSet,
    clustering: std::sync::Arc<CumulativeClustering>,
    theta: f64,
) -> Result<Traced, PipelineError> {
    let alignment = align_sequence(&clustering, reduced, &AlignmentConfig::new(theta)?)?;
    let mut ids: Vec<&str> = corpus.documents().iter().map(|d| d.doc_id.as_str()).collect();
    ids.sort_unstable();
    let trajectories = ids
        .into_iter()
        .map(|id| extract_trajectory(id, &clustering.windows, &alignment.registry))
        .collect::<Result<_, _>>()?;
    Ok(Traced {
        reduced_dim: reduced.dim,
        clustering,
        alignment,
        trajectories,
    })
}

fn resolve_cutoff(cfg: &RunConfig, delays: &[usize], needed: bool) -> Result<Cutoff, TaxonomyError> {
    let scope = match cfg.delay_scope {
        DelayScope::PerRun => "per-run",
        DelayScope::Pooled => "pooled",
    };
    if let Some(d) = cfg.theta_delay_override {
        return Ok(Cutoff {
            theta_delay: Some(d),
            source: Some("override"),
        });
    }
    match compute_cutoff(delays, cfg.delay_percentile) {
        Ok(c) => Ok(Cutoff {
            theta_delay: Some(c.theta_delay),
            source: Some(scope),
        }),
        Err(TaxonomyError::NoIntegrations) => match cfg.theta_delay_fallback {
            Some(d) => Ok(Cutoff {
                theta_delay: Some(d),
                source: Some("fallback"),
            }),
            // every document integrated: the cutoff is never consulted
            None if !needed => Ok(Cutoff {
                theta_delay: None,
                source: None,
            }),
            None => Err(TaxonomyError::NoIntegrations),
        },
        Err(e) => Err(e),
    }
}

fn classify(traced: &Traced, final_window: usize, cutoff: Cutoff) -> Result<Vec<TrajectoryRecord>, TaxonomyError> {
    traced
        .trajectories
        .iter()
        .map(|t| {
            Ok(TrajectoryRecord {
                trajectory: t.clone(),
                case: assign_case(t, final_window, cutoff.theta_delay.unwrap_or(0))?,
            })
        })
        .collect()
}

fn write_config_outputs(
    out: &Path,
    cfg: &RunConfig,
    key: &ConfigKey,
    fp: &str,
    traced: &Traced,
    records: &[TrajectoryRecord],
    cutoff: Cutoff,
) -> Result<(), PipelineError> {
    let dir = out.join(CONFIGS_DIR).join(key.slug());
    output::write_assignments(&dir, &traced.clustering, fp)?;
    output::write_topics(&dir, &traced.alignment, fp)?;
    output::write_trajectories(&dir, records, key, fp)?;
    let mut case_counts: BTreeMap<&'static str, usize> = Case::ALL.iter().map(|c| (c.as_str(), 0)).collect();
    for r in records {
        *case_counts.get_mut(r.case.as_str()).expect("all cases present") += 1;
    }
    let mean = traced.clustering.mean_silhouette();
    let summary = ConfigSummary {
        fingerprint: fp,
        model_id: &key.model_id,
        target_dim: key.target_dim,
        reduced_dim: traced.reduced_dim,
        algorithm: key.algorithm,
        params: cfg.cluster_params(key.algorithm).fingerprint(),
        theta_align: key.theta_align,
        seed: cfg.seed,
        num_windows: traced.clustering.windows.len(),
        num_topics: traced.alignment.registry.topics().count(),
        continued_links: traced.alignment.continued_links(),
        silhouette_mean: mean,
        silhouette_median: traced.clustering.median_silhouette(),
        silhouette_band: mean.map(SilhouetteBand::of),
        silhouettes: &traced.clustering.silhouettes,
        theta_delay: cutoff.theta_delay,
        theta_delay_source: cutoff.source,
        case_counts,
    };
    output::write_json(&dir.join(output::SUMMARY), &summary)
}

/// Removes the subtrees a run owns so stale files never reach the manifest.
fn clear_outputs(out: &Path) -> Result<(), PipelineError> {
    for sub in [
        output::MANIFEST,
        CONFIGS_DIR,
        "survival",
        reports::AGREEMENT_DIR,
        reports::TABLES_DIR,
        reports::PLOTS_DIR,
    ] {
        output::remove_if_exists(out.join(sub))?;
    }
    Ok(())
}

/// Runs the whole grid. Failing configurations are recorded in the manifest and skipped by the
/// cross-configuration reports; the caller decides whether that is fatal.
pub fn run_pipeline(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let (corpus, embeddings) = load_inputs(cfg)?;
    let out = cfg.output_dir.clone();
    let grid: Vec<ConfigKey> = sweep_grid(cfg)
        .into_iter()
        .filter(|k| matches_filters(&k.fingerprint(cfg.seed), &opts.fingerprint_filters))
        .collect();
    let final_window = corpus.timeline().final_window();

    let pool = pool(opts.jobs.or(cfg.jobs));
    let traced: Vec<Result<Traced, String>> = pool.install(|| {
        let mut reduce_keys: Vec<(String, TargetDim)> =
            grid.iter().map(|k| (k.model_id.clone(), k.target_dim)).collect();
        reduce_keys.dedup();
        let reduced: BTreeMap<(String, TargetDim), Result<ReducedSet, String>> = reduce_keys
            .par_iter()
            .map(|(m, d)| ((m.clone(), *d), reduce(&embeddings[m], *d).map_err(|e| e.to_string())))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();

        let mut cluster_keys: Vec<(String, TargetDim, Algorithm)> = grid
            .iter()
            .map(|k| (k.model_id.clone(), k.target_dim, k.algorithm))
            .collect();
        cluster_keys.dedup();
        let clustered: BTreeMap<(String, TargetDim, Algorithm), Result<std::sync::Arc<CumulativeClustering>, String>> =
            cluster_keys
                .par_iter()
                .map(|(m, d, a)| {
                    let res = match &reduced[&(m.clone(), *d)] {
                        Ok(r) => run_cumulative(r, &corpus, &cfg.cluster_params(*a))
                            .map(std::sync::Arc::new)
                            .map_err(|e| e.to_string()),
                        Err(e) => Err(e.clone()),
                    };
                    ((m.clone(), *d, *a), res)
                })
                .collect::<Vec<_>>()
                .into_iter()
                .collect();

        grid.par_iter()
            .map(|k| {
                let r = reduced[&(k.model_id.clone(), k.target_dim)].as_ref().map_err(Clone::clone)?;
                let c = clustered[&(k.model_id.clone(), k.target_dim, k.algorithm)]
                    .as_ref()
                    .map_err(Clone::clone)?;
                trace(&corpus, r, c.clone(), k.theta_align).map_err(|e| e.to_string())
            })
            .collect()
    });

    let pooled: Vec<usize> = traced
        .iter()
        .flatten()
        .flat_map(|t| outlier_phase_delays(&t.trajectories))
        .collect();

    clear_outputs(&out)?;
    let outcomes: Vec<(ConfigStatus, Option<RunRecords>)> = pool.install(|| {
        grid.par_iter()
            .zip(traced.par_iter())
            .map(|(key, traced)| {
                let fp = key.fingerprint(cfg.seed);
                let res = traced.as_ref().map_err(Clone::clone).and_then(|t| {
                    let own;
                    let delays = match cfg.delay_scope {
                        DelayScope::Pooled => &pooled,
                        DelayScope::PerRun => {
                            own = outlier_phase_delays(&t.trajectories);
                            &own
                        }
                    };
                    let needed = t.trajectories.iter().any(|tr| tr.integration.is_none());
                    let cutoff = resolve_cutoff(cfg, delays, needed).map_err(|e| e.to_string())?;
                    let records = classify(t, final_window, cutoff).map_err(|e| e.to_string())?;
                    write_config_outputs(&out, cfg, key, &fp, t, &records, cutoff).map_err(|e| e.to_string())?;
                    Ok((records, cutoff))
                });
                let mut status = ConfigStatus {
                    fingerprint: fp.clone(),
                    model_id: key.model_id.clone(),
                    target_dim: key.target_dim,
                    algorithm: key.algorithm,
                    theta_align: key.theta_align,
                    status: ConfigOutcome::Ok,
                    dir: None,
                    error: None,
                    theta_delay: None,
                    theta_delay_source: None,
                };
                match res {
                    Ok((records, cutoff)) => {
                        status.dir = Some(format!("{CONFIGS_DIR}/{}", key.slug()));
                        status.theta_delay = cutoff.theta_delay;
                        status.theta_delay_source = cutoff.source.map(str::to_string);
                        let run = RunRecords {
                            key: key.clone(),
                            fingerprint: fp,
                            records,
                        };
                        (status, Some(run))
                    }
                    Err(e) => {
                        log::warn!("configuration {fp} failed: {e}");
                        // never leave a half-written directory behind
                        let _ = output::remove_if_exists(out.join(CONFIGS_DIR).join(key.slug()));
                        status.status = ConfigOutcome::Failed;
                        status.error = Some(e);
                        (status, None)
                    }
                }
            })
            .collect()
    });
    let (statuses, runs): (Vec<ConfigStatus>, Vec<Option<RunRecords>>) = outcomes.into_iter().unzip();
    let runs: Vec<RunRecords> = runs.into_iter().flatten().collect();

    write_all_reports(&out, cfg, &corpus, &runs)?;
    let manifest = Manifest::write(&out, cfg.seed, statuses)?;
    Ok(RunSummary {
        out_dir: out,
        manifest,
        runs,
    })
}

fn write_all_reports(out: &Path, cfg: &RunConfig, corpus: &Corpus, runs: &[RunRecords]) -> Result<(), PipelineError> {
    let survival = pooled_survival(runs, cfg.delay_percentile);
    reports::write_survival(out, &survival)?;
    let groups = all_group_reports(runs);
    reports::write_agreement(out, &groups)?;
    let of = |v: View| groups.iter().filter(|g| g.view == v).cloned().collect::<Vec<_>>();
    reports::write_tables(out, runs, &of(View::ByModel), &of(View::ByDim))?;
    reports::write_plot_data(out, corpus, runs, &survival, &groups)
}

/// Reads the trajectory dumps of every successful configuration listed in the manifest.
pub fn load_run(out: &Path, filters: &[String]) -> Result<(Manifest, Vec<RunRecords>), PipelineError> {
    let manifest = Manifest::load(out)?;
    let mut runs = Vec::new();
    for c in &manifest.configurations {
        if c.status != ConfigOutcome::Ok || !matches_filters(&c.fingerprint, filters) {
            continue;
        }
        let dir = c
            .dir
            .as_ref()
            .ok_or_else(|| PipelineError::MissingArtifact(format!("{} output directory", c.fingerprint)))?;
        runs.push(RunRecords {
            key: c.key(),
            fingerprint: c.fingerprint.clone(),
            records: output::read_trajectories(&out.join(dir).join(TRAJECTORIES))?,
        });
    }
    Ok((manifest, runs))
}

/// Which cross-configuration report a standalone subcommand regenerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Survival,
    Agreement,
    PlotData,
}

/// Regenerates one report family from the trajectory dumps of a completed run.
pub fn regenerate_report(cfg: &RunConfig, kind: ReportKind, filters: &[String]) -> Result<Manifest, PipelineError> {
    let out = &cfg.output_dir;
    let (manifest, runs) = load_run(out, filters)?;
    let survival = pooled_survival(&runs, cfg.delay_percentile);
    match kind {
        ReportKind::Survival => {
            if survival.curve.is_none() {
                return Err(TaxonomyError::NoIntegrations.into());
            }
            reports::write_survival(out, &survival)?;
        }
        ReportKind::Agreement => {
            output::remove_if_exists(out.join(reports::AGREEMENT_DIR))?;
            output::remove_if_exists(out.join(reports::TABLES_DIR))?;
            let groups = all_group_reports(&runs);
            reports::write_agreement(out, &groups)?;
            let of = |v: View| groups.iter().filter(|g| g.view == v).cloned().collect::<Vec<_>>();
            reports::write_tables(out, &runs, &of(View::ByModel), &of(View::ByDim))?;
        }
        ReportKind::PlotData => {
            let corpus = load_corpus(&cfg.corpus_path)?;
            output::remove_if_exists(out.join(reports::PLOTS_DIR))?;
            reports::write_plot_data(out, &corpus, &runs, &survival, &all_group_reports(&runs))?;
        }
    }
    Manifest::write(out, manifest.seed, manifest.configurations)
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub documents: usize,
    pub first_day: String,
    pub final_day: String,
    pub windows: usize,
    pub models: BTreeMap<String, usize>,
}

/// Loads and validates the corpus and every embedding file.
pub fn ingest_check(cfg: &RunConfig) -> Result<IngestReport, InputError> {
    let (corpus, embeddings) = load_inputs(cfg)?;
    let tl = corpus.timeline();
    Ok(IngestReport {
        documents: corpus.len(),
        first_day: tl.first_day.to_string(),
        final_day: tl.final_day.to_string(),
        windows: tl.num_windows(),
        models: embeddings.iter().map(|(m, e)| (m.clone(), e.dim)).collect(),
    })
}

/// Ground-truth path written next to a synthetic corpus.
pub fn truth_path(corpus_path: &Path) -> PathBuf {
    corpus_path.with_extension("truth.csv")
}

/// Materializes the `[synthetic]` scenario at the configured corpus and embedding paths.
/// Documents and dates do not depend on the seed; model `i` (in id order) draws its vectors
/// with seed `seed + i`.
pub fn synthesize(cfg: &RunConfig) -> Result<(), PipelineError> {
    let spec = cfg
        .synthetic
        .as_ref()
        .ok_or_else(|| crate::error::ConfigError::Invalid("no [synthetic] scenario in config".into()))?;
    let mut corpus_written = false;
    for (i, (model, path)) in cfg.embeddings.iter().enumerate() {
        let mut spec = spec.clone();
        spec.model_id = model.clone();
        let stream = generate_synthetic_stream(&spec, cfg.seed.wrapping_add(i as u64))?;
        if !corpus_written {
            output::create_parent(&cfg.corpus_path)?;
            write_corpus(&stream.corpus, &cfg.corpus_path)?;
            write_ground_truth(&stream.truth, truth_path(&cfg.corpus_path))?;
            corpus_written = true;
        }
        output::create_parent(path)?;
        write_embeddings_jsonl(model, &spec.dim.to_string(), &stream.embeddings.vectors, path)?;
    }
    Ok(())
}
