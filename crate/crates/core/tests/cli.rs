use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_newstraj");

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        r#"schema_version = 1
corpus_path = "corpus.jsonl"
output_dir = "out"
seed = 5
algorithms = ["hdbscan", "dbscan"]
{extra}

[embeddings]
m = "m.jsonl"

[dbscan]
eps = 6.0
min_pts = 4

[synthetic]
start_date = "2024-03-01"
dim = 3
topics = [
  {{ birth_day = 20, arrivals = [6, 3, 3], precursor_days = [5, 12, 18] }},
  {{ birth_day = 20, arrivals = [6, 3, 3], precursor_days = [6, 10, 17] }},
]
noise_days = [2, 9, 30]
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn newstraj(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

#[test]
fn full_cycle_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();

    let (code, text) = newstraj(&["ingest-check", "--config", cfg]);
    assert_eq!(code, 3, "{text}");

    assert_eq!(newstraj(&["synth", "--config", cfg]).0, 0);
    let (code, text) = newstraj(&["ingest-check", "--config", cfg]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("\"documents\": 33"), "{text}");

    let (code, _) = newstraj(&["plot-data", "--config", cfg]);
    assert_eq!(code, 3);

    let (code, text) = newstraj(&["run", "--config", cfg, "--jobs", "2", "--fingerprint", "|hdbscan|"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("1 of 1"), "{text}");
    for sub in ["survival", "agreement", "plot-data"] {
        assert_eq!(newstraj(&[sub, "--config", cfg]).0, 0, "{sub}");
    }

    let alt = dir.path().join("alt");
    let (code, _) = newstraj(&["run", "--config", cfg, "--theta-delay", "3", "--seed", "9", "--out", alt.to_str().unwrap()]);
    assert_eq!(code, 0);
    let manifest = std::fs::read_to_string(dir.path().join("alt/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 9"));
    assert!(manifest.contains("\"theta_delay_source\": \"override\""));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "theta_align_values = [0.25]");
    assert_eq!(newstraj(&["run", "--config", cfg.to_str().unwrap()]).0, 2);
    assert_eq!(newstraj(&["run", "--config", "/definitely/missing.toml"]).0, 2);
    let cfg = write_config(dir.path(), "");
    assert_eq!(newstraj(&["synth", "--config", cfg.to_str().unwrap(), "--jobs", "0"]).0, 2);
}

#[test]
fn partial_grid_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "target_dims = [\"as-provided\", 5]");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(newstraj(&["synth", "--config", cfg]).0, 0);
    let (code, text) = newstraj(&["run", "--config", cfg]);
    assert_eq!(code, 4, "{text}");
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"status\": \"failed\""));
}
