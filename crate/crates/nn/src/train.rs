use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{warp_bilinear, warp_nearest, AugmentConfig, InPlaneTransform};
use crate::checkpoint::Checkpoint;
use crate::data::Dataset;
use crate::loss::dice_bce_loss;
use crate::net::Network;
use crate::optim::{lr_schedule, Adam};
use crate::{Error, Result, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub batch_size: usize,
    /// `(w_dice, w_bce)`, summing to one.
    pub loss_weights: (f64, f64),
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            warmup_steps: 1000,
            total_steps: 2000,
            batch_size: 8,
            loss_weights: (0.5, 0.5),
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

/// Step count of the full-scale schedule; the desk default is 2000.
pub const FULL_SCALE_TOTAL_STEPS: usize = 15_000;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (wd, wb) = self.loss_weights;
        if wd < 0.0 || wb < 0.0 || (wd + wb - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("loss weights must be non-negative and sum to 1, got ({wd}, {wb})")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.total_steps == 0 || self.warmup_steps >= self.total_steps {
            return Err(Error::Config(format!(
                "need 0 <= warmup_steps < total_steps, got {} and {}",
                self.warmup_steps, self.total_steps
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let a = &self.augment;
        if a.max_shift_fraction < 0.0 || a.max_rotation_deg < 0.0 || !(a.scale_range.0 > 0.0 && a.scale_range.0 <= a.scale_range.1) {
            return Err(Error::Config(format!("invalid augmentation ranges {a:?}")));
        }
        Ok(())
    }
}

/// Optimizer position; everything else about step `k` is derived from the
/// seed, so this is all a resume needs besides the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub step: usize,
    pub adam: Adam,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub dice_term: f64,
    pub bce_term: f64,
}

pub const LOG_HEADER: &str = "step,lr,loss,dice_term,bce_term";

impl LogRow {
    pub fn csv(&self) -> String {
        format!("{},{},{},{},{}", self.step, self.lr, self.loss, self.dice_term, self.bce_term)
    }
}

/// Generator for everything random in step `step`.
pub fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64 + 1);
    rng
}

/// Assembles the batch of step `step`: input `(b, 1, H, W)` and target
/// `(b, ...target_shape)`.
pub fn make_batch(data: &Dataset, cfg: &TrainConfig, step: usize) -> Result<(Tensor, Tensor)> {
    let mut rng = step_rng(cfg.seed, step);
    let [h, w] = data.input_hw;
    let per_target: usize = data.target_shape.iter().product();
    let b = cfg.batch_size;
    let mut x = Vec::with_capacity(b * h * w);
    let mut y = Vec::with_capacity(b * per_target);
    let augment = cfg.augment.enabled && data.kind.follows_input_plane();
    for _ in 0..b {
        let s = &data.samples[rng.gen_range(0..data.samples.len())];
        if augment {
            let t = InPlaneTransform::sample(&cfg.augment, [h, w], &mut rng);
            x.extend(warp_bilinear(&s.input, [h, w], &t).into_iter().map(|v| v.clamp(0.0, 1.0)));
            y.extend(warp_nearest(&s.target, [h, w], &t).into_iter().map(f32::from));
        } else {
            x.extend_from_slice(&s.input);
            y.extend(s.target.iter().map(|&v| f32::from(v)));
        }
    }
    let mut ts = vec![b];
    ts.extend_from_slice(&data.target_shape);
    Ok((Tensor::new(&[b, 1, h, w], x)?, Tensor::new(&ts, y)?))
}

/// Runs steps `state.step .. until`, calling `on_step` after each update.
pub fn train_steps(
    net: &mut Network,
    data: &Dataset,
    cfg: &TrainConfig,
    state: &mut TrainState,
    until: usize,
    mut on_step: impl FnMut(&LogRow) -> Result<()>,
) -> Result<()> {
    cfg.validate()?;
    let expected = net.config().output_shape();
    if expected != data.target_shape || net.config().input_hw() != data.input_hw {
        return Err(Error::Config(format!(
            "model maps {:?} to {:?} but the data is {:?} to {:?}",
            net.config().input_hw(),
            expected,
            data.input_hw,
            data.target_shape
        )));
    }
    let (wd, wb) = cfg.loss_weights;
    while state.step < until.min(cfg.total_steps) {
        let step = state.step;
        let (x, y) = make_batch(data, cfg, step)?;
        net.zero_grad();
        let logits = net.forward(&x)?;
        let loss = dice_bce_loss(&logits, &y, wd, wb)?;
        if !loss.loss.is_finite() {
            return Err(Error::NanLoss { step });
        }
        net.backward(&loss.grad)?;
        let lr = lr_schedule(step, cfg);
        state.adam.step(&mut net.params_mut(), lr)?;
        state.step += 1;
        on_step(&LogRow {
            step,
            lr,
            loss: loss.loss,
            dice_term: loss.dice_term,
            bce_term: loss.bce_term,
        })?;
    }
    Ok(())
}

pub struct TrainOutputs<'a> {
    pub checkpoint: &'a Path,
    pub log: &'a Path,
}

/// Trains from scratch, or from `resume`, up to `stop_at` (default: the
/// configured total) and writes the checkpoint. Log rows are appended when
/// resuming.
pub fn train(
    data: &Dataset,
    model: &crate::net::ModelConfig,
    cfg: &TrainConfig,
    out: &TrainOutputs,
    resume: Option<Checkpoint>,
    stop_at: Option<usize>,
) -> Result<Checkpoint> {
    cfg.validate()?;
    let (mut net, mut state) = match resume {
        Some(ck) => {
            if &ck.model != model || ck.labels != data.labels {
                return Err(Error::Config("resume checkpoint was trained with a different model or label set".into()));
            }
            ck.restore()?
        }
        None => {
            let net = Network::new(model, cfg.seed)?;
            let adam = Adam::new(&net.params());
            (net, TrainState { step: 0, adam })
        }
    };
    let fresh = state.step == 0;
    let mut log = if fresh {
        let mut f = File::create(out.log).map_err(|e| Error::io(out.log, e))?;
        writeln!(f, "{LOG_HEADER}").map_err(|e| Error::io(out.log, e))?;
        f
    } else {
        OpenOptions::new().append(true).open(out.log).map_err(|e| Error::io(out.log, e))?
    };
    let until = stop_at.unwrap_or(cfg.total_steps);
    train_steps(&mut net, data, cfg, &mut state, until, |row| {
        writeln!(log, "{}", row.csv()).map_err(|e| Error::io(out.log, e))
    })?;
    let ck = Checkpoint::capture(&net, Some(&state), cfg, data)?;
    ck.save(out.checkpoint)?;
    Ok(ck)
}
