use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{flatten, lift, Encoder};
use crate::layers::{Conv2d, Layer, Relu, Upsample};
use crate::tensor::{concat_channels, split_channels};
use crate::{Error, Result, Tensor};

/// A 2D U-shaped network whose head resizes to `output_hw` with a strided
/// convolution, so one depth image can be mapped onto any anatomical plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UNet2dConfig {
    pub input_hw: [usize; 2],
    pub widths: Vec<usize>,
    pub convs_per_level: usize,
    pub n_labels: usize,
    pub output_hw: [usize; 2],
}

impl Default for UNet2dConfig {
    fn default() -> Self {
        Self {
            input_hw: [64, 64],
            widths: vec![8, 16, 32, 64],
            convs_per_level: 2,
            n_labels: 41,
            output_hw: [64, 64],
        }
    }
}

impl UNet2dConfig {
    /// Head stride per axis.
    pub fn head_stride(&self) -> Result<[usize; 2]> {
        let mut s = [0; 2];
        for a in 0..2 {
            let (i, o) = (self.input_hw[a], self.output_hw[a]);
            if o == 0 || i % o != 0 {
                return Err(Error::Config(format!(
                    "output size {:?} must divide input size {:?}",
                    self.output_hw, self.input_hw
                )));
            }
            s[a] = i / o;
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) || self.n_labels == 0 || self.convs_per_level == 0 {
            return Err(Error::Config("widths, n_labels and convs_per_level must be positive".into()));
        }
        Encoder::level_sizes(self.input_hw, self.widths.len())?;
        self.head_stride().map(|_| ())
    }
}

#[derive(Clone, Debug)]
struct Stage {
    up: Upsample,
    up_channels: usize,
    conv: Conv2d,
    relu: Relu,
}

#[derive(Clone, Debug)]
pub struct UNet2d {
    cfg: UNet2dConfig,
    encoder: Encoder,
    stages: Vec<Stage>,
    head: Conv2d,
}

impl UNet2d {
    pub fn new(cfg: &UNet2dConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let encoder = Encoder::new(1, &cfg.widths, cfg.convs_per_level, rng)?;
        let levels = cfg.widths.len();
        let mut stages = Vec::new();
        let mut c = cfg.widths[levels - 1];
        for level in (0..levels - 1).rev() {
            let w = cfg.widths[level];
            stages.push(Stage {
                up: Upsample::new([1, 2, 2])?,
                up_channels: c,
                conv: Conv2d::new(c + w, w, [3, 3], [1, 1], [1, 1], rng)?,
                relu: Relu::new(),
            });
            c = w;
        }
        let s = cfg.head_stride()?;
        let head = Conv2d::new(c, cfg.n_labels, s, s, [0, 0], rng)?;
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            stages,
            head,
        })
    }

    pub fn config(&self) -> &UNet2dConfig {
        &self.cfg
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let [h, w] = self.cfg.input_hw;
        if x.shape().len() != 4 || x.shape()[1..] != [1, h, w] {
            let b = x.shape().first().copied().unwrap_or(1);
            return Err(Error::shape("unet2d", &[b, 1, h, w], x.shape()));
        }
        let feats = self.encoder.forward(x)?;
        let levels = feats.len();
        let mut z = feats[levels - 1].clone();
        for (i, st) in self.stages.iter_mut().enumerate() {
            let level = levels - 2 - i;
            z = flatten(st.up.forward(&lift(z)?)?)?;
            z = concat_channels(&z, &feats[level])?;
            z = st.relu.forward(&st.conv.forward(&z)?)?;
        }
        self.head.forward(&z)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let levels = self.cfg.widths.len();
        let mut enc: Vec<Option<Tensor>> = vec![None; levels];
        let mut g = self.head.backward(grad)?;
        for (i, st) in self.stages.iter_mut().enumerate().rev() {
            let level = levels - 2 - i;
            g = st.conv.backward(&st.relu.backward(&g)?)?;
            let (gz, gs) = split_channels(&g, st.up_channels)?;
            enc[level] = Some(gs);
            g = flatten(st.up.backward(&lift(gz)?)?)?;
        }
        enc[levels - 1] = Some(g);
        self.encoder.backward(enc)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        for st in &self.stages {
            p.extend(st.conv.params());
        }
        p.extend(self.head.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        for st in &mut self.stages {
            p.extend(st.conv.params_mut());
        }
        p.extend(self.head.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plane_output_shapes() {
        for out in [[64, 64], [32, 64], [64, 32]] {
            let cfg = UNet2dConfig { widths: vec![2, 4], n_labels: 3, output_hw: out, ..Default::default() };
            let mut net = UNet2d::new(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let y = net.forward(&Tensor::zeros(&[2, 1, 64, 64])).unwrap();
            assert_eq!(y.shape(), &[2, 3, out[0], out[1]]);
        }
    }

    #[test]
    fn non_dividing_output_rejected() {
        let cfg = UNet2dConfig { output_hw: [48, 64], ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
