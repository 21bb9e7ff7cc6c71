#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use depthscout_nn::net::{Conversion, Pix2VoxConfig};

pub fn depthscout(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depthscout"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs a command that must succeed and returns its stdout.
pub fn ok(args: &[&str]) -> String {
    let out = depthscout(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A network small enough to train in seconds on 16-cubed phantoms.
pub fn small_model() -> Pix2VoxConfig {
    Pix2VoxConfig {
        input_hw: [16, 16],
        encoder_widths: vec![4, 8],
        convs_per_level: 1,
        bottleneck: Conversion { k: 1, s: 1, f: 4, pad: 0 },
        skips: vec![],
        decoder_widths: vec![4],
        decoder_kernels: vec![1],
        n_labels: 2,
        output_shape: [16, 16, 16],
    }
}

const SMALL: [&str; 8] = ["--shape", "16,16,16", "--spacing", "20,20,30", "--n-organs", "2", "--noise", "0.05"];

/// phantom, depth, train, predict and eval in `dir`, single-threaded.
pub fn pipeline(dir: &Path, seed: &str) {
    let (train, test) = (dir.join("train"), dir.join("test"));
    let mut args = vec!["--jobs", "1", "phantom", "--n", "6", "--seed", "7", "--out", s(&train)];
    args.extend(SMALL);
    ok(&args);
    let mut args = vec!["--jobs", "1", "phantom", "--n", "3", "--seed", "500", "--out", s(&test)];
    args.extend(SMALL);
    ok(&args);
    ok(&["--jobs", "1", "depth", "--data", s(&train)]);
    ok(&["--jobs", "1", "depth", "--data", s(&test)]);

    let cfg = dir.join("train.json");
    fs::write(&cfg, serde_json::json!({ "model": small_model() }).to_string()).unwrap();
    let model = dir.join("model");
    ok(&[
        "--jobs", "1", "train", "--config", s(&cfg), "--data", s(&train), "--out", s(&model), "--seed", seed,
        "--total-steps", "12", "--warmup-steps", "3", "--batch-size", "2", "--lr", "0.01",
    ]);
    let pred = dir.join("pred");
    ok(&["--jobs", "1", "predict", "--checkpoint", s(&model.join("model.ckpt")), "--data", s(&test), "--out", s(&pred)]);
    ok(&["--jobs", "1", "eval", "--pred", s(&pred), "--gt", s(&test), "--out", s(&dir.join("report"))]);
}

/// Files of the pipeline whose bytes must not depend on the run.
pub const REPRODUCIBLE: [&str; 4] = ["model/model.ckpt", "model/train_log.csv", "report/per_sample.csv", "report/aggregate.json"];
