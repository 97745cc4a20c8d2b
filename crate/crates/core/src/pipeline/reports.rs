//! Cross-configuration reports: pooled survival, agreement, tables and plot data.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use super::output::{fmt_opt, write_csv, write_json};
use super::{sanitize, ConfigKey, RunRecords};
use crate::agreement::{agreement_report, case_shares, AgreementReport, Kappa, RaterShares, Task};
use crate::cluster::Algorithm;
use crate::corpus::Corpus;
use crate::error::PipelineError;
use crate::reduce::TargetDim;
use crate::taxonomy::{delay_quantile, integrated_outlier_delays, survival_curve, Case, SurvivalCurve};

pub const SURVIVAL_JSON: &str = "survival/survival.json";
pub const AGREEMENT_DIR: &str = "agreement";
pub const TABLES_DIR: &str = "tables";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone, Serialize)]
pub struct PooledSurvival {
    pub fingerprints: Vec<String>,
    pub percentile: f64,
    pub sample_size: usize,
    /// Cutoff at `percentile` over the pooled sample.
    pub theta_delay: Option<usize>,
    pub curve: Option<SurvivalCurve>,
}

pub fn pooled_survival(runs: &[RunRecords], percentile: f64) -> PooledSurvival {
    let delays: Vec<usize> = runs.iter().flat_map(|r| integrated_outlier_delays(&r.records)).collect();
    PooledSurvival {
        fingerprints: runs.iter().map(|r| r.fingerprint.clone()).collect(),
        percentile,
        sample_size: delays.len(),
        theta_delay: delay_quantile(&delays, percentile),
        curve: survival_curve(&delays).ok(),
    }
}

pub fn write_survival(out: &Path, survival: &PooledSurvival) -> Result<(), PipelineError> {
    write_json(&out.join(SURVIVAL_JSON), survival)
}

/// Which configuration axis plays the rater role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    ByModel,
    ByDim,
    ByAlgorithm,
}

impl View {
    pub const ALL: [View; 3] = [View::ByModel, View::ByDim, View::ByAlgorithm];

    pub fn as_str(&self) -> &'static str {
        match self {
            View::ByModel => "by_model",
            View::ByDim => "by_dim",
            View::ByAlgorithm => "by_algorithm",
        }
    }

    fn split(&self, k: &ConfigKey) -> (String, String) {
        let th = k.theta_str();
        match self {
            View::ByModel => (format!("dim{}__{}__theta{th}", k.target_dim, k.algorithm), k.model_id.clone()),
            View::ByDim => (format!("{}__{}__theta{th}", k.model_id, k.algorithm), k.target_dim.to_string()),
            View::ByAlgorithm => (format!("{}__dim{}__theta{th}", k.model_id, k.target_dim), k.algorithm.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub view: View,
    pub group: String,
    pub raters: Vec<String>,
    pub fingerprints: Vec<String>,
    /// Empty with fewer than two raters.
    pub reports: Vec<AgreementReport>,
    pub errors: Vec<String>,
    pub case_shares: Vec<RaterShares>,
    #[serde(skip)]
    pub keys: Vec<ConfigKey>,
}

pub fn group_reports(runs: &[RunRecords], view: View) -> Vec<GroupReport> {
    let mut groups: BTreeMap<String, Vec<(String, &RunRecords)>> = BTreeMap::new();
    for r in runs {
        let (g, rater) = view.split(&r.key);
        groups.entry(g).or_default().push((rater, r));
    }
    groups
        .into_iter()
        .map(|(group, mut members)| {
            members.sort_by(|a, b| a.1.key.cmp(&b.1.key));
            let raters: Vec<(String, Vec<_>)> = members.iter().map(|(n, r)| (n.clone(), r.records.clone())).collect();
            let mut reports = Vec::new();
            let mut errors = Vec::new();
            if raters.len() >= 2 {
                for task in Task::ALL {
                    match agreement_report(task, &raters) {
                        Ok(rep) => reports.push(rep),
                        Err(e) => errors.push(format!("{}: {e}", task.as_str())),
                    }
                }
            }
            GroupReport {
                view,
                group,
                raters: raters.iter().map(|r| r.0.clone()).collect(),
                fingerprints: members.iter().map(|m| m.1.fingerprint.clone()).collect(),
                reports,
                errors,
                case_shares: case_shares(&raters),
                keys: members.iter().map(|m| m.1.key.clone()).collect(),
            }
        })
        .collect()
}

pub fn write_agreement(out: &Path, groups: &[GroupReport]) -> Result<(), PipelineError> {
    for g in groups {
        let path = out
            .join(AGREEMENT_DIR)
            .join(g.view.as_str())
            .join(format!("{}.json", sanitize(&g.group)));
        write_json(&path, g)?;
    }
    Ok(())
}

fn kappa_cell(k: &Kappa) -> String {
    match k {
        Kappa::Value(v) => v.to_string(),
        Kappa::Degenerate => "degenerate".into(),
    }
}

/// Appendix-style tables.
///
/// * `kappa_<task>_<algo>.csv` and `ma_<task>_<algo>.csv`: rows = dims, columns = theta, raters = models
/// * `interdim_kappa_<task>_<algo>.csv`: rows = models, columns = theta, raters = dims
/// * `toa_share_<algo>.csv`: rows = models, columns = `dim@theta`
pub fn write_tables(out: &Path, runs: &[RunRecords], by_model: &[GroupReport], by_dim: &[GroupReport]) -> Result<(), PipelineError> {
    let dir = out.join(TABLES_DIR);
    let algos: BTreeSet<Algorithm> = runs.iter().map(|r| r.key.algorithm).collect();
    let thetas: Vec<String> = runs
        .iter()
        .map(|r| r.key.theta_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for algo in &algos {
        for task in Task::ALL {
            // dims x theta
            let mut kappa: BTreeMap<TargetDim, BTreeMap<String, String>> = BTreeMap::new();
            let mut ma: BTreeMap<TargetDim, BTreeMap<String, String>> = BTreeMap::new();
            for g in by_model.iter().filter(|g| g.keys[0].algorithm == *algo) {
                let Some(rep) = g.reports.iter().find(|r| r.task == task) else {
                    continue;
                };
                let k = &g.keys[0];
                kappa.entry(k.target_dim).or_default().insert(k.theta_str(), kappa_cell(&rep.kappa));
                ma.entry(k.target_dim).or_default().insert(k.theta_str(), rep.majority_agreement.to_string());
            }
            for (name, table) in [("kappa", &kappa), ("ma", &ma)] {
                if table.is_empty() {
                    continue;
                }
                write_matrix(
                    &dir.join(format!("{name}_{}_{algo}.csv", task.as_str())),
                    "target_dim",
                    &thetas,
                    table.iter().map(|(d, row)| (d.to_string(), row)),
                )?;
            }

            // models x theta
            let mut inter: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
            for g in by_dim.iter().filter(|g| g.keys[0].algorithm == *algo) {
                let Some(rep) = g.reports.iter().find(|r| r.task == task) else {
                    continue;
                };
                let k = &g.keys[0];
                inter.entry(k.model_id.clone()).or_default().insert(k.theta_str(), kappa_cell(&rep.kappa));
            }
            if !inter.is_empty() {
                write_matrix(
                    &dir.join(format!("interdim_kappa_{}_{algo}.csv", task.as_str())),
                    "model_id",
                    &thetas,
                    inter.iter().map(|(m, row)| (m.clone(), row)),
                )?;
            }
        }

        let mut share: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut cols = BTreeSet::new();
        for r in runs.iter().filter(|r| r.key.algorithm == *algo) {
            let col = format!("{}@{}", r.key.target_dim, r.key.theta_str());
            cols.insert((r.key.target_dim, r.key.theta_str()));
            let s = case_shares(&[(r.key.model_id.clone(), r.records.clone())]);
            share.entry(r.key.model_id.clone()).or_default().insert(col, fmt_opt(s[0].toa_share));
        }
        let cols: Vec<String> = cols.into_iter().map(|(d, t)| format!("{d}@{t}")).collect();
        write_matrix(
            &dir.join(format!("toa_share_{algo}.csv")),
            "model_id",
            &cols,
            share.iter().map(|(m, row)| (m.clone(), row)),
        )?;
    }
    Ok(())
}

fn write_matrix<'a>(
    path: &Path,
    row_header: &str,
    cols: &[String],
    rows: impl Iterator<Item = (String, &'a BTreeMap<String, String>)>,
) -> Result<(), PipelineError> {
    let header: Vec<&str> = std::iter::once(row_header).chain(cols.iter().map(String::as_str)).collect();
    let body: Vec<Vec<String>> = rows
        .map(|(name, row)| {
            std::iter::once(name)
                .chain(cols.iter().map(|c| row.get(c).cloned().unwrap_or_default()))
                .collect()
        })
        .collect();
    write_csv(path, &header, &body)
}

fn key_cells(k: &ConfigKey) -> [String; 4] {
    [k.model_id.clone(), k.target_dim.to_string(), k.algorithm.to_string(), k.theta_str()]
}

/// Data behind the timeline, survival, case-share, TOA-share and consensus figures.
pub fn write_plot_data(
    out: &Path,
    corpus: &Corpus,
    runs: &[RunRecords],
    survival: &PooledSurvival,
    groups: &[GroupReport],
) -> Result<(), PipelineError> {
    let dir = out.join(PLOTS_DIR);

    let tl = corpus.timeline();
    let daily: Vec<Vec<String>> = corpus
        .daily_counts()
        .into_iter()
        .map(|(day, n, cum)| vec![day.to_string(), tl.window_of(day).to_string(), n.to_string(), cum.to_string()])
        .collect();
    write_csv(&dir.join("daily_counts.csv"), &["date", "window", "daily", "cumulative"], &daily)?;

    let mut surv = Vec::new();
    if let Some(c) = &survival.curve {
        for &(t, s) in &c.steps {
            let marks: Vec<&str> = [("p50", c.p50), ("p75", c.p75), ("p90", c.p90), ("p95", c.p95)]
                .iter()
                .filter(|m| m.1 == t)
                .map(|m| m.0)
                .collect();
            surv.push(vec![t.to_string(), s.to_string(), marks.join("+")]);
        }
    }
    write_csv(&dir.join("survival.csv"), &["t", "survival", "quantile_marker"], &surv)?;

    let mut shares = Vec::new();
    let mut toa = Vec::new();
    for r in runs {
        let s = &case_shares(&[(r.key.model_id.clone(), r.records.clone())])[0];
        for case in Case::ALL {
            let name = case.as_str();
            let mut row = vec![r.fingerprint.clone()];
            row.extend(key_cells(&r.key));
            row.extend([name.to_string(), s.counts[name].to_string(), s.fractions[name].to_string()]);
            shares.push(row);
        }
        let mut row = vec![r.fingerprint.clone()];
        row.extend(key_cells(&r.key));
        row.push(fmt_opt(s.toa_share));
        toa.push(row);
    }
    const KEY: [&str; 5] = ["fingerprint", "model_id", "target_dim", "algorithm", "theta_align"];
    let header = |extra: &[&'static str]| KEY.iter().chain(extra).copied().collect::<Vec<&str>>();
    write_csv(&dir.join("case_shares.csv"), &header(&["case", "count", "fraction"]), &shares)?;
    write_csv(&dir.join("toa_share.csv"), &header(&["toa_share"]), &toa)?;

    let mut consensus = Vec::new();
    for g in groups {
        for rep in g.reports.iter().filter(|r| r.task == Task::CaseBinaryToa) {
            for &(n, frac) in &rep.consensus_curve {
                consensus.push(vec![g.view.as_str().to_string(), g.group.clone(), n.to_string(), frac.to_string()]);
            }
        }
    }
    write_csv(&dir.join("consensus.csv"), &["view", "group", "n", "fraction"], &consensus)?;
    Ok(())
}

/// Every view's group reports, in view order.
pub fn all_group_reports(runs: &[RunRecords]) -> Vec<GroupReport> {
    View::ALL.iter().flat_map(|&v| group_reports(runs, v)).collect()
}
