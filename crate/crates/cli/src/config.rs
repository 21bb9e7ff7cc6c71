//! Run configurations: JSON files overridden by flags, snapshotted next to
//! each command's outputs so a run can be repeated from the snapshot alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use depthscout_core::depthsynth::DepthSynthConfig;
use depthscout_core::metrics::EvalConfig;
use depthscout_core::phantom::PhantomParams;
use depthscout_nn::net::{Pix2VoxConfig, UNet2dConfig};
use depthscout_nn::train::TrainConfig;

use crate::failure::{Classify, Outcome};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomRun {
    pub n: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub phantom: PhantomParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthRun {
    pub data: Option<PathBuf>,
    pub depth: DepthSynthConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelsRun {
    /// Label volumes, highest priority first.
    pub sources: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub fill_holes: bool,
    pub min_fraction: f64,
}

impl Default for LabelsRun {
    fn default() -> Self {
        Self {
            sources: Vec::new(),
            out: None,
            fill_holes: true,
            min_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Pix2VoxConfig,
    pub train: TrainConfig,
    pub resume: Option<PathBuf>,
    /// Stop early at this step; the schedule still spans `total_steps`.
    pub stop_at: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictRun {
    pub checkpoint: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanRun {
    /// Training manifest.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Manifest to write predictions for.
    pub predict: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionRun {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub predict: Option<PathBuf>,
    pub seed: u64,
    pub model: UNet2dConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalRun {
    pub pred: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub eval: EvalConfig,
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Outcome<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .usage()?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("invalid config {}", path.display()))
        .usage()
}

/// Writes `<dir>/<name>_config.json`.
pub fn snapshot<T: Serialize>(dir: &Path, name: &str, run: &T) -> Outcome<PathBuf> {
    let path = dir.join(format!("{name}_config.json"));
    let mut text = serde_json::to_string_pretty(run).expect("configs serialize");
    text.push('\n');
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, text))
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()?;
    Ok(path)
}

/// A path that must be set by flag or config.
pub fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Outcome<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("missing {what}: pass the flag or set it in the config file"))
        .usage()
}

/// Deterministic sub-seed for a named consumer of the run seed
/// (SplitMix64 finaliser over the seed mixed with an FNV-1a hash of the name).
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
