use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynqoi_cli::config::{preset, PipelineConfig};
use dynqoi_cli::pipeline::{files, Diagnostics};

fn dynqoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynqoi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, cfg: &PipelineConfig) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn small(name: &str, out: PathBuf) -> PipelineConfig {
    let mut cfg = preset(name, out).unwrap();
    let exp = cfg.experiment.as_mut().unwrap();
    exp.n_predicted = 240;
    exp.n_observed = 80;
    cfg.svm.k_folds = 4;
    cfg
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "{}").unwrap();
    let out = dynqoi(&["all", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    for field in ["filter", "clustering", "svm", "qoi", "density", "seed", "output_dir", "experiment|inputs"] {
        assert!(msg.contains(field), "{msg}");
    }
}

#[test]
fn unreadable_config_is_a_config_error() {
    let out = dynqoi(&["all", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_without_inputs_reports_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("oscillator", dir.path().join("run"));
    let path = write_config(dir.path(), &cfg);
    let out = dynqoi(&["filter", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let msg = stderr(&out);
    assert!(msg.contains(files::PREDICTED) && msg.contains("generate"), "{msg}");
}

#[test]
fn unknown_stage_is_rejected() {
    let out = dynqoi(&["smooth", "--config", "x.json"]);
    assert!(!out.status.success());
    let out = dynqoi(&["preset", "lorenz", "--config", "x.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn preset_writes_a_loadable_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hopf.json");
    let out = dynqoi(&[
        "preset",
        "hopf",
        "--config",
        path.to_str().unwrap(),
        "--out",
        "runs/hopf",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let cfg = PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg.seed, 5);
    assert_eq!(cfg.output_dir, PathBuf::from("runs/hopf"));
    assert_eq!(cfg.clustering.k, 3);
}

#[test]
fn staged_run_matches_full_run_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let staged = dir.path().join("staged");
    let cfg = small("oscillator", staged.clone());
    let path = write_config(dir.path(), &cfg);
    for stage in ["generate", "filter", "dynamics", "qoi", "invert", "metrics"] {
        let out = dynqoi(&[stage, "--config", path.to_str().unwrap()]);
        assert!(out.status.success(), "{stage}: {}", stderr(&out));
    }
    let full = dir.path().join("full");
    let out = dynqoi(&["all", "--config", path.to_str().unwrap(), "--out", full.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let mut names: Vec<_> = std::fs::read_dir(&staged)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 20);
    for name in names {
        let a = std::fs::read(staged.join(&name)).unwrap();
        let b = std::fs::read(full.join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }

    let diag: Diagnostics =
        serde_json::from_str(&std::fs::read_to_string(staged.join(files::DIAGNOSTICS)).unwrap()).unwrap();
    assert_eq!(diag.clusters.len(), 3);
    assert_eq!(diag.tv_table.len(), 2);
    assert_eq!(diag.event_probabilities.len(), 3);

    // a different seed changes the data
    let other = dir.path().join("other");
    let out = dynqoi(&[
        "generate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    assert_ne!(
        std::fs::read(staged.join(files::OBSERVED)).unwrap(),
        std::fs::read(other.join(files::OBSERVED)).unwrap()
    );
}

#[test]
fn shock_probes_give_different_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for name in ["shock-6.5", "shock-9.5"] {
        let out_dir = dir.path().join(name);
        let cfg = small(name, out_dir.clone());
        let path = dir.path().join(format!("{name}.json"));
        std::fs::write(&path, cfg.to_json()).unwrap();
        let out = dynqoi(&["all", "--config", path.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
        tables.push(std::fs::read_to_string(out_dir.join(files::TV_TABLE)).unwrap());
    }
    assert_ne!(tables[0], tables[1]);
}

#[test]
fn manifest_records_config_hash_and_stage_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let cfg = small("oscillator", run.clone());
    let path = write_config(dir.path(), &cfg);
    let out = dynqoi(&["generate", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join(files::MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
    assert!(manifest["stages"]["generate"][files::PREDICTED].is_string());
    assert_eq!(manifest["seeds"]["seed"], cfg.seed);
}
