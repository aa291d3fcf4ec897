use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn funcnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funcnet")).args(args).output().unwrap()
}

fn write_config(dir: &Path, densities: &str) -> PathBuf {
    let path = dir.join("cfg.json");
    let text = format!(
        r#"{{
  "name": "cli",
  "dataset": {{ "kind": "synthetic", "seed": 4, "classes": 2, "samples": 120, "features": 6 }},
  "train_samples": 80,
  "groups": [ {{ "name": "vanilla", "regularizer": "none", "hidden": [48, 32] }} ],
  "seeds": [1, 2],
  "train": {{ "epochs": 2, "batch_size": 16 }},
  "densities": {densities},
  "small_world": {{ "densities": [0.05], "samples": 2 }},
  "tda": {{ "source": {{ "network": {{ "density": 0.05 }} }} }},
  "output_dir": "unused"
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn report_on_empty_directory_is_a_dependency_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[0.05]");
    let out = tmp.path().join("empty");
    let r = funcnet(&["report", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing"));
}

#[test]
fn invalid_density_and_arguments_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[0.001]");
    let out = tmp.path().join("o");
    let r = funcnet(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!out.exists());
    assert_eq!(funcnet(&["run"]).status.code(), Some(1));
    assert_eq!(funcnet(&["gta", "--config", s(&cfg), "--densities", "0.1:0.2"]).status.code(), Some(1));
    assert_eq!(funcnet(&["--help"]).status.code(), Some(0));
}

#[test]
fn stagewise_commands_match_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[0.05, 0.1]");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let r = funcnet(&["run", "--config", s(&cfg), "--out", s(&a), "--workers", "2"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for stage in ["train", "capture", "connect", "binarize", "gta", "tda", "report"] {
        let r = funcnet(&[stage, "--config", s(&cfg), "--out", s(&b), "--workers", "1"]);
        assert!(r.status.success(), "{stage}: {}", String::from_utf8_lossy(&r.stderr));
    }
    for file in
        ["report.json", "gta.csv", "config.json", "models/vanilla-s2/connectivity.fnmx", "models/vanilla-s1/curves.csv"]
    {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    // a second run has nothing to do
    let r = funcnet(&["run", "--config", s(&cfg), "--out", s(&a)]);
    assert!(String::from_utf8_lossy(&r.stderr).lines().all(|l| l.contains("ran 0")));
}

#[test]
fn gta_over_the_default_sweep_emits_eight_rows_per_model() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[0.05]");
    let out = tmp.path().join("o");
    let flags = ["--config", s(&cfg), "--out", s(&out), "--densities", "0.025:0.2:0.025"];
    for stage in ["train", "capture", "connect", "binarize", "gta"] {
        let r = funcnet(&[&[stage], &flags[..]].concat());
        assert!(r.status.success(), "{stage}: {}", String::from_utf8_lossy(&r.stderr));
    }
    for seed in [1, 2] {
        let csv = std::fs::read_to_string(out.join(format!("models/vanilla-s{seed}/gta.csv"))).unwrap();
        assert_eq!(csv.lines().count() - 1, 8);
    }
}
