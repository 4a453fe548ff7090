use std::path::Path;
use std::process::{Command, Output};

fn germeval(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_germeval"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn prepared() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    assert!(germeval(d.path(), &["synth", "--size", "120", "--out", "synth"]).status.success());
    assert!(germeval(d.path(), &["preprocess", "--input", "synth", "--out", "train"]).status.success());
    d
}

#[test]
fn missing_inputs_name_the_producing_command() {
    let d = prepared();
    let o = germeval(d.path(), &["train-pool", "--data", "train"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("germeval split"), "{}", stderr(&o));

    let o = germeval(d.path(), &["split", "--data", "nowhere"]);
    assert!(stderr(&o).contains("germeval preprocess"), "{}", stderr(&o));

    let o = germeval(d.path(), &["bootstrap", "--pool", "train", "--data", "train"]);
    assert!(stderr(&o).contains("germeval train-pool"), "{}", stderr(&o));
}

#[test]
fn predict_requires_saved_models() {
    let d = prepared();
    let args = ["train-pool", "--data", "train", "--all-data", "--count", "1", "--buckets", "256", "--out", "pool"];
    assert!(germeval(d.path(), &args).status.success());
    let o = germeval(d.path(), &["predict", "--pool", "pool", "--data", "train"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--keep-models"), "{}", stderr(&o));
}

#[test]
fn runs_write_manifests_under_hashed_directories() {
    let d = prepared();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("train/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "preprocess");
    assert_eq!(manifest["inputs"][0]["role"], "input");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    assert!(germeval(d.path(), &["split", "--data", "train"]).status.success());
    let runs: Vec<_> = std::fs::read_dir(d.path().join("runs")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(runs.len(), 1);
    assert!(runs[0].to_string_lossy().starts_with("split-"));
    assert!(d.path().join("runs").join(&runs[0]).join("folds.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("run.toml"), "[pool]\nsize = 3\n").unwrap();
    let o = germeval(d.path(), &["--config", "run.toml", "synth"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run.toml"), "{}", stderr(&o));
}
