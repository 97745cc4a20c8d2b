use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use newstraj::config::RunConfig;
use newstraj::error::PipelineError;
use newstraj::pipeline::{self, ReportKind, RunOptions};

/// Document trajectories over a news stream: cumulative clustering, topic alignment,
/// outlier taxonomy and cross-model agreement.
#[derive(Parser)]
#[command(name = "newstraj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the corpus and every embedding file.
    IngestCheck(Common),
    /// Write the `[synthetic]` scenario to the configured corpus and embedding paths.
    Synth(Common),
    /// Run the sweep grid and write every report.
    Run(Common),
    /// Recompute the pooled survival report from a finished run.
    Survival(Common),
    /// Recompute agreement reports and tables from a finished run.
    Agreement(Common),
    /// Recompute plot-ready CSVs from a finished run.
    PlotData(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Worker pool width.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed delay cutoff in days.
    #[arg(long)]
    theta_delay: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to configurations whose fingerprint contains this string (repeatable).
    #[arg(long = "fingerprint")]
    fingerprints: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.theta_delay {
            cfg.theta_delay_override = Some(d);
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = Some(j);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::Config(_) => 2,
        PipelineError::Input(_) | PipelineError::MissingArtifact(_) => 3,
        PipelineError::PartialFailure { .. } => 4,
        _ => 1,
    }
}

fn execute(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::IngestCheck(c) => {
            let report = pipeline::ingest_check(&c.load()?)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        Command::Synth(c) => {
            let cfg = c.load()?;
            pipeline::synthesize(&cfg)?;
            println!("wrote {}", cfg.corpus_path.display());
        }
        Command::Run(c) => {
            let cfg = c.load()?;
            let opts = RunOptions {
                jobs: cfg.jobs,
                fingerprint_filters: c.fingerprints.clone(),
            };
            let summary = pipeline::run_pipeline(&cfg, &opts)?;
            let total = summary.manifest.configurations.len();
            let failed = summary.failed();
            println!(
                "{} of {total} configurations succeeded; outputs in {}",
                total - failed,
                summary.out_dir.display()
            );
            if failed > 0 {
                return Err(PipelineError::PartialFailure { failed, total });
            }
        }
        Command::Survival(c) => report(&c, ReportKind::Survival)?,
        Command::Agreement(c) => report(&c, ReportKind::Agreement)?,
        Command::PlotData(c) => report(&c, ReportKind::PlotData)?,
    }
    Ok(())
}

fn report(c: &Common, kind: ReportKind) -> Result<(), PipelineError> {
    let cfg = c.load()?;
    let m = pipeline::regenerate_report(&cfg, kind, &c.fingerprints)?;
    println!("manifest lists {} artifacts", m.artifacts.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
