use std::f64::consts::PI;

use crate::train::TrainConfig;
use crate::{Error, Result, Tensor};

/// Linear warm-up to `lr` over `warmup_steps`, then cosine decay to zero at
/// `total_steps`.
pub fn lr_schedule(step: usize, cfg: &TrainConfig) -> f64 {
    let (w, t) = (cfg.warmup_steps, cfg.total_steps);
    if step < w {
        return cfg.lr * (step + 1) as f64 / w as f64;
    }
    if step >= t {
        return 0.0;
    }
    let progress = (step - w) as f64 / (t - w) as f64;
    cfg.lr * 0.5 * (1.0 + (PI * progress).cos())
}

/// Adam with bias correction. Moments are kept per parameter tensor, in the
/// order the parameters are passed to [`Adam::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    /// Number of updates applied so far.
    pub t: u64,
}

impl Adam {
    pub fn new(params: &[&Tensor]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            t: 0,
        }
    }

    /// Applies one update from the accumulated gradients.
    pub fn step(&mut self, params: &mut [&mut Tensor], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || params.iter().zip(&self.m).any(|(p, m)| p.len() != m.len()) {
            return Err(Error::Config("optimizer state does not match the parameters".into()));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = (lr / c1) as f32;
        let (c2, eps) = (c2 as f32, self.eps as f32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = match p.grad() {
                Some(g) => g.to_vec(),
                None => continue,
            };
            for (((w, m), v), g) in p.data_mut().iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= step * *m / ((*v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
