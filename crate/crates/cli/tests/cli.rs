use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/cnof500.smi")
}

fn molgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molgen")).args(args).output().expect("spawn molgen")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

/// Temp dir with the first 50 fixture molecules and a run config for `model`.
fn setup(model: &str, extra: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let lines: Vec<String> = fs::read_to_string(fixture()).unwrap().lines().take(50).map(String::from).collect();
    fs::write(dir.path().join("train.smi"), lines.join("\n") + "\n").unwrap();
    let cfg = format!(
        r#"{{"model": "{model}", "dataset": {{"path": "train.smi"}}, "epochs": 2, "seed": 3, "output_dir": "{}"{extra}}}"#,
        dir.path().join("run").display()
    );
    let path = dir.path().join("run.json");
    fs::write(&path, cfg).unwrap();
    (dir, path)
}

fn body_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn molgan_train_generate_inspect() {
    let (dir, cfg) = setup("molgan", "");
    ok(&molgen(&["train", "--config", cfg.to_str().unwrap()]));
    let run = dir.path().join("run");
    let ckpt = run.join("checkpoint.json");
    assert!(ckpt.exists() && run.join("history.csv").exists() && run.join("config.json").exists());
    let first = fs::read(run.join("history.csv")).unwrap();
    assert!(String::from_utf8_lossy(&first).contains("# seed: 3"));

    ok(&molgen(&["train", "--config", cfg.to_str().unwrap()]));
    assert_eq!(fs::read(run.join("history.csv")).unwrap(), first);

    let g1 = dir.path().join("g1.smi");
    let g2 = dir.path().join("g2.smi");
    for g in [&g1, &g2] {
        ok(&molgen(&[
            "generate",
            ckpt.to_str().unwrap(),
            "--count",
            "10",
            "--seed",
            "5",
            "--out",
            g.to_str().unwrap(),
        ]));
    }
    assert_eq!(body_lines(&g1).len(), 10);
    assert_eq!(fs::read(&g1).unwrap(), fs::read(&g2).unwrap());
    assert!(fs::read_to_string(&g1).unwrap().contains("# config_digest: "));

    let out = molgen(&["inspect-checkpoint", ckpt.to_str().unwrap()]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("model: molgan") && text.contains("generator.node_head.weight"));
}

#[test]
fn nflow_generates_only_valid_lines() {
    let (dir, cfg) = setup("nflow", r#", "nflow": {"batch_size": 16}"#);
    ok(&molgen(&["train", "--config", cfg.to_str().unwrap()]));
    let ckpt = dir.path().join("run/checkpoint.json");
    let g = dir.path().join("g.smi");
    ok(&molgen(&["generate", ckpt.to_str().unwrap(), "--count", "300", "--out", g.to_str().unwrap()]));
    let lines = body_lines(&g);
    assert_eq!(lines.len(), 300);
    assert!(lines.iter().all(|l| !l.starts_with("INVALID:")));
}

#[test]
fn bad_sampling_mode_is_a_config_error() {
    let (_dir, cfg) = setup("molgan", r#", "molgan": {"sampling_mode": "hardmax"}"#);
    let out = molgen(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampling_mode"));
}

#[test]
fn missing_dataset_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"model": "molgan", "dataset": {"path": "nope.smi"}}"#).unwrap();
    assert_eq!(molgen(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn evaluate_reports() {
    let dir = TempDir::new().unwrap();
    let train = dir.path().join("train.smi");
    fs::write(&train, "CCO\nCC\nC#N\nCO\n").unwrap();

    let out = dir.path().join("self");
    ok(&molgen(&[
        "evaluate",
        train.to_str().unwrap(),
        "--training",
        train.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(doc["rows"][0]["novelty"], 0.0);
    assert!(out.with_extension("txt").exists());

    let mixed = dir.path().join("mixed.smi");
    fs::write(&mixed, "# seed: 4\nC\nCC\nCCC\nN\nINVALID: atoms= bonds=\nC.C\nFF(F)\nINVALID:CC.O atoms=C,C,O bonds=0-1:1\nO=O=O\nbogus(\n").unwrap();
    let out = dir.path().join("mixed");
    ok(&molgen(&[
        "evaluate",
        mixed.to_str().unwrap(),
        "--training",
        train.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(doc["rows"][0]["validity"], 40.0);
    assert_eq!(doc["rows"][0]["novelty"], 75.0);
    assert_eq!(doc["rows"][0]["seed"], 4);
}

#[test]
fn ten_seed_evaluation_has_mean_row() {
    let (dir, cfg) = setup("nflow", r#", "nflow": {"batch_size": 16}"#);
    ok(&molgen(&["train", "--config", cfg.to_str().unwrap(), "--seed", "9"]));
    let ckpt = dir.path().join("run/checkpoint.json");
    let out = dir.path().join("seeds");
    ok(&molgen(&[
        "evaluate",
        "--training",
        dir.path().join("train.smi").to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--seeds",
        "0,1,2,3,4,5,6,7,8,9",
        "--count",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[10]["label"], "mean");
    assert_eq!(rows[10]["validity"], 100.0);
}
