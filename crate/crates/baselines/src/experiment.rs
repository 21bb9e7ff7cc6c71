//! Desk-scale comparison of the volumetric network against the mean model
//! on held-out phantoms, run entirely in memory.

use std::time::Instant;

use depthscout_core::depthsynth::{simulate_depth, DepthSynthConfig};
use depthscout_core::metrics::{evaluate_samples, EvalConfig, EvalReport, Prediction};
use depthscout_core::phantom::{generate_phantom, PhantomParams};
use depthscout_core::{DepthImage, LabelVolume};
use depthscout_nn::augment::AugmentConfig;
use depthscout_nn::data::{Dataset, TargetKind};
use depthscout_nn::net::{ModelConfig, Network, Pix2VoxConfig};
use depthscout_nn::optim::Adam;
use depthscout_nn::train::{train_steps, TrainConfig, TrainState};
use depthscout_nn::{Checkpoint, Predictor};

use crate::MeanModel;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub phantom: PhantomParams,
    pub depth: DepthSynthConfig,
    pub model: Pix2VoxConfig,
    pub train: TrainConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let phantom = PhantomParams::default();
        let model = Pix2VoxConfig {
            n_labels: phantom.n_organs,
            ..Pix2VoxConfig::default()
        };
        Self {
            phantom,
            depth: DepthSynthConfig::default(),
            model,
            // One core and a 2000-step budget: a shorter warmup, a higher
            // peak rate and smaller batches than the full-scale recipe.
            train: TrainConfig {
                lr: 0.005,
                warmup_steps: 50,
                batch_size: 4,
                augment: AugmentConfig { enabled: false, ..AugmentConfig::default() },
                ..TrainConfig::default()
            },
            n_train: 128,
            n_test: 32,
            train_seed: 1_000,
            test_seed: 900_000,
            eval: EvalConfig::default(),
        }
    }
}

/// Headline numbers of one run.
#[derive(Clone, Debug)]
pub struct Summary {
    pub dice: f64,
    pub doe_lr: f64,
    pub doe_ap: f64,
    pub doe_si: f64,
}

impl Summary {
    fn of(r: &EvalReport) -> Self {
        let a = &r.aggregates;
        let axis = |k: &str| a.per_axis.get(k).and_then(|s| s.mean).unwrap_or(f64::INFINITY);
        Self {
            dice: a.dice.mean.unwrap_or(0.0),
            doe_lr: axis("LR"),
            doe_ap: axis("AP"),
            doe_si: axis("SI"),
        }
    }
}

pub struct ExperimentResult {
    pub network: EvalReport,
    pub mean_model: EvalReport,
    pub final_loss: f64,
    pub train_seconds: f64,
}

impl ExperimentResult {
    pub fn network_summary(&self) -> Summary {
        Summary::of(&self.network)
    }

    pub fn mean_summary(&self) -> Summary {
        Summary::of(&self.mean_model)
    }
}

fn samples(cfg: &ExperimentConfig, first: u64, n: usize) -> depthscout_core::Result<Vec<(String, DepthImage, LabelVolume)>> {
    (first..first + n as u64)
        .map(|seed| {
            let (vol, labels) = generate_phantom(&PhantomParams {
                seed,
                ..cfg.phantom.clone()
            })?;
            Ok((seed.to_string(), simulate_depth(&vol, &cfg.depth)?, labels))
        })
        .collect()
}

/// Trains on `n_train` phantoms, then scores both methods on `n_test`
/// unseen ones. `progress` sees `(step, loss)` after every update.
pub fn run(cfg: &ExperimentConfig, mut progress: impl FnMut(usize, f64)) -> depthscout_nn::Result<ExperimentResult> {
    let train_set = samples(cfg, cfg.train_seed, cfg.n_train)?;
    let test_set = samples(cfg, cfg.test_seed, cfg.n_test)?;

    let mean = MeanModel::fit(&train_set.iter().map(|s| s.2.clone()).collect::<Vec<_>>())?;
    let data = Dataset::from_samples(train_set.into_iter().map(Ok), TargetKind::Volume, None)?;

    let model = ModelConfig::Pix2vox(cfg.model.clone());
    let mut net = Network::new(&model, cfg.train.seed)?;
    let mut state = TrainState {
        step: 0,
        adam: Adam::new(&net.params()),
    };
    let started = Instant::now();
    let mut final_loss = f64::NAN;
    train_steps(&mut net, &data, &cfg.train, &mut state, cfg.train.total_steps, |row| {
        final_loss = row.loss;
        progress(row.step, row.loss);
        Ok(())
    })?;
    let train_seconds = started.elapsed().as_secs_f64();

    let mut predictor = Predictor::new(&Checkpoint::capture(&net, None, &cfg.train, &data)?)?;
    let mut net_rows = Vec::with_capacity(test_set.len());
    let mut mean_rows = Vec::with_capacity(test_set.len());
    for (id, depth, gt) in test_set {
        net_rows.push((id.clone(), Prediction::Volume(predictor.predict(&depth)?), gt.clone()));
        mean_rows.push((id, Prediction::Volume(mean.predict(&depth)), gt));
    }
    Ok(ExperimentResult {
        network: evaluate_samples(&net_rows, &cfg.eval)?,
        mean_model: evaluate_samples(&mean_rows, &cfg.eval)?,
        final_loss,
        train_seconds,
    })
}
