//! The binary end to end: help text, exit codes, config overrides and
//! snapshots.

mod common;

use std::fs;

use common::*;
use serde_json::Value;

#[test]
fn help_documents_the_defaults() {
    let top = ok(&["--help"]);
    for d in ["0.02", "0.3", "0.5/0.5", "0.001", "1000", "15000", "batch size 8"] {
        assert!(top.contains(d), "top-level help lacks {d}");
    }
    for c in ["phantom", "depth", "labels", "train", "predict", "baseline", "eval"] {
        assert!(top.contains(c), "help lacks {c}");
    }
    let depth = ok(&["depth", "--help"]);
    assert!(depth.contains("[default: 0.3]") && depth.contains("[default: 0.02]"));
    let train = ok(&["train", "--help"]);
    for d in ["[default: 0.001]", "[default: 1000]", "15000", "[default: 8]", "[default: 0.5]"] {
        assert!(train.contains(d), "train help lacks {d}");
    }
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(depthscout(&["phantom", "--n", "-1"]).status.code(), Some(2));
    assert_eq!(depthscout(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(depthscout(&["--jobs", "0", "phantom"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let out = depthscout(&["depth", "--data", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));

    // No output directory at all.
    assert_eq!(depthscout(&["phantom", "--n", "1"]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n": 2, "colour": "red"}"#).unwrap();
    assert_eq!(depthscout(&["phantom", "--config", s(&bad)]).status.code(), Some(2));
    fs::write(&bad, r#"{"phantom": {"n_organs": 99}}"#).unwrap();
    let out = depthscout(&["phantom", "--config", s(&bad), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    // A regular file where the output directory should go.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = depthscout(&["phantom", "--n", "1", "--shape", "16,16,16", "--out", s(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flags_override_the_config_and_the_snapshot_repeats_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    fs::write(&cfg, r#"{"n": 5, "seed": 3, "phantom": {"shape": [16, 16, 16], "n_organs": 3}}"#).unwrap();
    let a = dir.path().join("a");
    ok(&["phantom", "--config", s(&cfg), "--n", "2", "--out", s(&a)]);
    let snap: Value = serde_json::from_slice(&fs::read(a.join("phantom_config.json")).unwrap()).unwrap();
    assert_eq!(snap["n"], 2);
    assert_eq!(snap["seed"], 3);
    assert_eq!(snap["phantom"]["n_organs"], 3);
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["items"].as_array().unwrap().len(), 2);

    // The snapshot alone, pointed elsewhere, reproduces every file.
    let b = dir.path().join("b");
    ok(&["phantom", "--config", s(&a.join("phantom_config.json")), "--out", s(&b)]);
    for e in fs::read_dir(&a).unwrap() {
        let name = e.unwrap().file_name();
        if name == "phantom_config.json" {
            continue;
        }
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn pipeline_runs_and_training_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), "1");
    for f in ["model/train_config.json", "pred/predict_config.json", "report/eval_config.json", "train/depth_config.json"] {
        assert!(dir.path().join(f).exists(), "missing snapshot {f}");
    }
    let report: Value = serde_json::from_slice(&fs::read(dir.path().join("report/aggregate.json")).unwrap()).unwrap();
    assert!(report.is_object());

    // Same seed through the train snapshot: identical checkpoint.
    let again = dir.path().join("again");
    let snap = dir.path().join("model/train_config.json");
    ok(&["train", "--config", s(&snap), "--out", s(&again)]);
    assert_eq!(fs::read(dir.path().join("model/model.ckpt")).unwrap(), fs::read(again.join("model.ckpt")).unwrap());

    // Stop early, resume, and land on the same bytes.
    let split = dir.path().join("split");
    ok(&["train", "--config", s(&snap), "--out", s(&split), "--stop-at", "5"]);
    ok(&["train", "--config", s(&snap), "--out", s(&split), "--resume", s(&split.join("model.ckpt"))]);
    assert_eq!(fs::read(again.join("model.ckpt")).unwrap(), fs::read(split.join("model.ckpt")).unwrap());

    // A different seed gives a different model.
    let other = dir.path().join("other");
    ok(&["train", "--config", s(&snap), "--out", s(&other), "--seed", "2"]);
    assert_ne!(fs::read(again.join("model.ckpt")).unwrap(), fs::read(other.join("model.ckpt")).unwrap());
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["phantom", "--n", "3", "--seed", "11", "--shape", "16,16,16", "--n-organs", "3", "--out", s(&data)]);
    let out = dir.path().join("r");
    ok(&["eval", "--pred", s(&data), "--gt", s(&data), "--out", s(&out)]);
    let report: Value = serde_json::from_slice(&fs::read(out.join("aggregate.json")).unwrap()).unwrap();
    let text = report.to_string();
    assert_eq!(report["dice"]["mean"], 1.0, "{text}");
    for axis in ["LR", "AP", "SI"] {
        assert_eq!(report["per_axis"][axis]["mean"], 0.0, "{text}");
    }
}

#[test]
fn mean_baseline_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (dir.path().join("train"), dir.path().join("test"));
    ok(&["phantom", "--n", "4", "--seed", "1", "--shape", "16,16,16", "--n-organs", "3", "--out", s(&train)]);
    ok(&["phantom", "--n", "2", "--seed", "90", "--shape", "16,16,16", "--n-organs", "3", "--out", s(&test)]);
    let mean = dir.path().join("mean");
    ok(&["baseline", "mean", "--train", s(&train), "--out", s(&mean), "--predict", s(&test)]);
    assert!(mean.join("baseline_mean_config.json").exists());
    ok(&["eval", "--pred", s(&mean), "--gt", s(&test)]);
    let report: Value = serde_json::from_slice(&fs::read(mean.join("aggregate.json")).unwrap()).unwrap();
    let d = report["dice"]["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&d));
    let rows = fs::read_to_string(mean.join("per_sample.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 3);
}

#[test]
fn projection_baseline_writes_boxes_that_eval_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (dir.path().join("train"), dir.path().join("test"));
    ok(&["phantom", "--n", "3", "--seed", "1", "--shape", "16,16,16", "--n-organs", "2", "--out", s(&train)]);
    ok(&["phantom", "--n", "2", "--seed", "90", "--shape", "16,16,16", "--n-organs", "2", "--out", s(&test)]);
    ok(&["depth", "--data", s(&train)]);
    ok(&["depth", "--data", s(&test)]);
    let cfg = dir.path().join("p.json");
    fs::write(&cfg, r#"{"model": {"widths": [4, 8]}}"#).unwrap();
    let out = dir.path().join("proj");
    let res = depthscout(&[
        "baseline", "proj25d", "--config", s(&cfg), "--train", s(&train), "--out", s(&out), "--predict", s(&test),
        "--total-steps", "3", "--warmup-steps", "1", "--batch-size", "2",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for plane in ["coronal", "sagittal", "axial"] {
        assert!(out.join(format!("{plane}.ckpt")).exists());
    }
    ok(&["eval", "--pred", s(&out), "--gt", s(&test)]);
    let rows = fs::read_to_string(out.join("per_sample.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2);

    // A plane checkpoint cannot drive volumetric prediction.
    let bad = depthscout(&["predict", "--checkpoint", s(&out.join("axial.ckpt")), "--data", s(&test), "--out", s(&dir.path().join("x"))]);
    assert_eq!(bad.status.code(), Some(2));
}
