//! Checkpoint file: one JSON header line, then little-endian `f32`
//! parameters followed (optionally) by Adam's first and second moments.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use depthscout_core::{DepthImage, Geometry, LabelVolume};

use crate::data::{depth_to_input, volume_from_logits, Dataset, TargetKind};
use crate::net::{ModelConfig, Network};
use crate::optim::Adam;
use crate::train::{TrainConfig, TrainState};
use crate::{Error, Result, Tensor};

pub const FORMAT: &str = "depthscout-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    model: ModelConfig,
    train: TrainConfig,
    labels: Vec<String>,
    target: TargetKind,
    geometry: Geometry,
    step: usize,
    param_shapes: Vec<Vec<usize>>,
    optimizer: bool,
    adam_t: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub labels: Vec<String>,
    pub target: TargetKind,
    /// Geometry of the training volumes; predictions reuse its AP spacing
    /// and origin.
    pub geometry: Geometry,
    pub step: usize,
    pub param_shapes: Vec<Vec<usize>>,
    pub params: Vec<f32>,
    /// Adam `(t, m, v)`.
    pub adam: Option<(u64, Vec<f32>, Vec<f32>)>,
}

fn flat(chunks: &[Vec<f32>]) -> Vec<f32> {
    chunks.iter().flatten().copied().collect()
}

fn unflat(flat: &[f32], shapes: &[Vec<usize>]) -> Vec<Vec<f32>> {
    let mut at = 0;
    shapes
        .iter()
        .map(|s| {
            let n: usize = s.iter().product();
            at += n;
            flat[at - n..at].to_vec()
        })
        .collect()
}

impl Checkpoint {
    pub fn capture(net: &Network, state: Option<&TrainState>, train: &TrainConfig, data: &Dataset) -> Result<Self> {
        let params = net.params();
        Ok(Self {
            model: net.config(),
            train: train.clone(),
            labels: data.labels.clone(),
            target: data.kind,
            geometry: data.geometry,
            step: state.map_or(0, |s| s.step),
            param_shapes: params.iter().map(|p| p.shape().to_vec()).collect(),
            params: params.iter().flat_map(|p| p.data().iter().copied()).collect(),
            adam: state.map(|s| (s.adam.t, flat(&s.adam.m), flat(&s.adam.v))),
        })
    }

    /// Rebuilds the network and optimizer state.
    pub fn restore(&self) -> Result<(Network, TrainState)> {
        let mut net = Network::new(&self.model, self.train.seed)?;
        let shapes: Vec<Vec<usize>> = net.params().iter().map(|p| p.shape().to_vec()).collect();
        if shapes != self.param_shapes {
            return Err(Error::Config("checkpoint parameter shapes do not match its model config".into()));
        }
        for (p, v) in net.params_mut().into_iter().zip(unflat(&self.params, &shapes)) {
            p.data_mut().copy_from_slice(&v);
        }
        let mut adam = Adam::new(&net.params());
        if let Some((t, m, v)) = &self.adam {
            adam.t = *t;
            adam.m = unflat(m, &shapes);
            adam.v = unflat(v, &shapes);
        }
        Ok((net, TrainState { step: self.step, adam }))
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            model: self.model.clone(),
            train: self.train.clone(),
            labels: self.labels.clone(),
            target: self.target,
            geometry: self.geometry,
            step: self.step,
            param_shapes: self.param_shapes.clone(),
            optimizer: self.adam.is_some(),
            adam_t: self.adam.as_ref().map_or(0, |a| a.0),
        };
        let mut out = serde_json::to_vec(&header).map_err(|e| Error::Config(e.to_string()))?;
        out.push(b'\n');
        let mut put = |v: &[f32]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        put(&self.params);
        if let Some((_, m, v)) = &self.adam {
            put(m);
            put(v);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint { path: path.to_path_buf(), message: m };
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line".into()))?;
        let h: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| bad(format!("header: {e}")))?;
        if h.format != FORMAT || h.version != VERSION {
            return Err(bad(format!("unsupported format {} version {}", h.format, h.version)));
        }
        let n: usize = h.param_shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        let blocks = if h.optimizer { 3 } else { 1 };
        let body = &bytes[nl + 1..];
        if body.len() != 4 * n * blocks {
            return Err(bad(format!("expected {} payload bytes, found {}", 4 * n * blocks, body.len())));
        }
        let vals: Vec<f32> = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Self {
            model: h.model,
            train: h.train,
            labels: h.labels,
            target: h.target,
            geometry: h.geometry,
            step: h.step,
            param_shapes: h.param_shapes,
            params: vals[..n].to_vec(),
            adam: h.optimizer.then(|| (h.adam_t, vals[n..2 * n].to_vec(), vals[2 * n..].to_vec())),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

/// A restored network ready for inference.
pub struct Predictor {
    pub net: Network,
    pub labels: Vec<String>,
    pub target: TargetKind,
    pub geometry: Geometry,
}

impl Predictor {
    pub fn new(ck: &Checkpoint) -> Result<Self> {
        Ok(Self {
            net: ck.restore()?.0,
            labels: ck.labels.clone(),
            target: ck.target,
            geometry: ck.geometry,
        })
    }

    /// Raw logits for one depth image, batch axis dropped.
    pub fn logits(&mut self, depth: &DepthImage) -> Result<Vec<f32>> {
        let hw = self.net.config().input_hw();
        if depth.shape() != hw {
            return Err(Error::shape("predict", &hw, &depth.shape()));
        }
        let x = Tensor::new(&[1, 1, hw[0], hw[1]], depth_to_input(depth))?;
        Ok(self.net.forward(&x)?.into_data())
    }

    /// Per-label masks thresholded at probability 0.5. The output geometry
    /// takes LR/SI spacing from the depth image and AP spacing and origin
    /// from training.
    pub fn predict(&mut self, depth: &DepthImage) -> Result<LabelVolume> {
        if self.target != TargetKind::Volume {
            return Err(Error::Config("this checkpoint predicts plane projections, not volumes".into()));
        }
        let logits = self.logits(depth)?;
        let ps = depth.pixel_spacing_mm();
        let g = Geometry::new(
            self.geometry.shape(),
            [ps[0], self.geometry.spacing_mm()[1], ps[1]],
            self.geometry.origin_mm(),
        )?;
        volume_from_logits(&logits, &self.labels, g)
    }
}
