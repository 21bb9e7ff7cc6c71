use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{add, Encoder};
use crate::layers::{Conv3d, Convert2dTo3d, Layer, Relu, Upsample};
use crate::tensor::{concat_channels, split_channels};
use crate::{Error, Result, Tensor};

/// A 2D-to-3D conversion: depth kernel `k`, depth stride `s`, `f` output
/// features and depth padding `pad`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversion {
    pub k: usize,
    pub s: usize,
    pub f: usize,
    #[serde(default)]
    pub pad: usize,
}

impl Conversion {
    /// Depth produced from `c` channels: `floor((c + 2 pad - k) / s) + 1`.
    pub fn depth(&self, c: usize) -> Option<usize> {
        if self.s == 0 || self.k == 0 || c + 2 * self.pad < self.k {
            return None;
        }
        Some((c + 2 * self.pad - self.k) / self.s + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipConversion {
    /// Encoder level whose output feeds the decoder (0 = full resolution).
    pub level: usize,
    #[serde(flatten)]
    pub conversion: Conversion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pix2VoxConfig {
    /// `(H, W)` of the depth image: `(LR, SI)`.
    pub input_hw: [usize; 2],
    pub encoder_widths: Vec<usize>,
    pub convs_per_level: usize,
    pub bottleneck: Conversion,
    pub skips: Vec<SkipConversion>,
    /// One entry per decoder stage, coarsest first.
    pub decoder_widths: Vec<usize>,
    /// Cubic kernel size of each decoder stage (odd).
    pub decoder_kernels: Vec<usize>,
    pub n_labels: usize,
    /// `(D, H, W)` of the output volume: `(AP, LR, SI)`.
    pub output_shape: [usize; 3],
}

impl Default for Pix2VoxConfig {
    /// The desk-scale network: 64x64 depth in, 32x64x64 volumes out.
    fn default() -> Self {
        Self {
            input_hw: [64, 64],
            encoder_widths: vec![16, 32, 64, 128],
            convs_per_level: 2,
            bottleneck: Conversion { k: 32, s: 32, f: 32, pad: 0 },
            skips: vec![
                SkipConversion { level: 2, conversion: Conversion { k: 8, s: 8, f: 16, pad: 0 } },
                SkipConversion { level: 1, conversion: Conversion { k: 2, s: 2, f: 8, pad: 0 } },
            ],
            decoder_widths: vec![24, 8, 8],
            decoder_kernels: vec![3, 1, 1],
            n_labels: 41,
            output_shape: [32, 64, 64],
        }
    }
}

/// Shapes implied by a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pix2VoxPlan {
    pub level_hw: Vec<[usize; 2]>,
    pub bottleneck_depth: usize,
    /// `(level, depth)` of every skip conversion.
    pub skip_depths: Vec<(usize, usize)>,
    /// Depth after each decoder stage.
    pub stage_depths: Vec<usize>,
    /// Input channels of each decoder stage's convolution.
    pub stage_in_channels: Vec<usize>,
    pub output: [usize; 3],
}

impl Pix2VoxConfig {
    /// Checks the configuration and derives every intermediate shape.
    pub fn plan(&self) -> Result<Pix2VoxPlan> {
        let cfg_err = |m: String| Err(Error::Config(m));
        let levels = self.encoder_widths.len();
        if levels == 0 || self.encoder_widths.contains(&0) {
            return cfg_err("encoder widths must be non-empty and positive".into());
        }
        if self.n_labels == 0 || self.convs_per_level == 0 {
            return cfg_err("n_labels and convs_per_level must be positive".into());
        }
        if self.decoder_widths.len() != levels - 1 || self.decoder_kernels.len() != levels - 1 {
            return cfg_err(format!(
                "{} encoder levels need {} decoder widths and kernels, got {} and {}",
                levels,
                levels - 1,
                self.decoder_widths.len(),
                self.decoder_kernels.len()
            ));
        }
        if self.decoder_widths.contains(&0) || self.decoder_kernels.iter().any(|k| k % 2 == 0) {
            return cfg_err("decoder widths must be positive and kernels odd".into());
        }
        let level_hw = Encoder::level_sizes(self.input_hw, levels)?;
        if self.input_hw.contains(&0) {
            return cfg_err("input size must be positive".into());
        }
        let conv_err = |what: &str, c: Conversion, ch: usize| {
            Error::Config(format!("{what} conversion {c:?} does not fit {ch} channels"))
        };
        let bottleneck_depth = self
            .bottleneck
            .depth(self.encoder_widths[levels - 1])
            .ok_or_else(|| conv_err("bottleneck", self.bottleneck, self.encoder_widths[levels - 1]))?;
        if self.bottleneck.f == 0 {
            return cfg_err("bottleneck needs at least one feature".into());
        }
        let mut skip_depths = Vec::new();
        for (i, s) in self.skips.iter().enumerate() {
            if s.level + 1 >= levels {
                return cfg_err(format!("skip level {} must be below the bottleneck level {}", s.level, levels - 1));
            }
            if self.skips[..i].iter().any(|o| o.level == s.level) {
                return cfg_err(format!("skip level {} listed twice", s.level));
            }
            if s.conversion.f == 0 {
                return cfg_err(format!("skip level {} needs at least one feature", s.level));
            }
            let ch = self.encoder_widths[s.level];
            let d = s.conversion.depth(ch).ok_or_else(|| conv_err("skip", s.conversion, ch))?;
            skip_depths.push((s.level, d));
        }
        let mut d = bottleneck_depth;
        let mut c = self.bottleneck.f;
        let mut stage_depths = Vec::new();
        let mut stage_in_channels = Vec::new();
        for stage in 0..levels - 1 {
            let level = levels - 2 - stage;
            let mut cin = c;
            match self.skips.iter().position(|s| s.level == level) {
                Some(i) => {
                    let sd = skip_depths[i].1;
                    if sd != d && sd != 2 * d {
                        return cfg_err(format!(
                            "skip at level {level} has depth {sd}, decoder depth there is {d} (needs {d} or {})",
                            2 * d
                        ));
                    }
                    d = sd;
                    cin += self.skips[i].conversion.f;
                }
                None => d *= 2,
            }
            stage_depths.push(d);
            stage_in_channels.push(cin);
            c = self.decoder_widths[stage];
        }
        let output = [d, self.input_hw[0], self.input_hw[1]];
        if output != self.output_shape {
            return cfg_err(format!(
                "layers produce output {output:?} but output_shape is {:?}",
                self.output_shape
            ));
        }
        Ok(Pix2VoxPlan {
            level_hw,
            bottleneck_depth,
            skip_depths,
            stage_depths,
            stage_in_channels,
            output,
        })
    }
}

#[derive(Clone, Debug)]
struct Stage {
    up: Upsample,
    up_channels: usize,
    skip: Option<(usize, Convert2dTo3d, Relu)>,
    conv: Conv3d,
    relu: Relu,
}

/// Depth image `(b, 1, H, W)` to per-label logits `(b, L, D, H, W)`.
#[derive(Clone, Debug)]
pub struct Pix2Vox {
    cfg: Pix2VoxConfig,
    encoder: Encoder,
    bottleneck: (Convert2dTo3d, Relu),
    stages: Vec<Stage>,
    head: Conv3d,
}

impl Pix2Vox {
    pub fn new(cfg: &Pix2VoxConfig, rng: &mut impl Rng) -> Result<Self> {
        let plan = cfg.plan()?;
        let levels = cfg.encoder_widths.len();
        let encoder = Encoder::new(1, &cfg.encoder_widths, cfg.convs_per_level, rng)?;
        let b = cfg.bottleneck;
        let bottleneck = (Convert2dTo3d::new(b.k, b.s, b.f, b.pad, rng)?, Relu::new());
        let mut stages = Vec::with_capacity(levels - 1);
        let mut prev_d = plan.bottleneck_depth;
        let mut prev_c = b.f;
        for stage in 0..levels - 1 {
            let level = levels - 2 - stage;
            let d = plan.stage_depths[stage];
            let skip = match cfg.skips.iter().find(|s| s.level == level) {
                Some(s) => {
                    let c = s.conversion;
                    Some((level, Convert2dTo3d::new(c.k, c.s, c.f, c.pad, rng)?, Relu::new()))
                }
                None => None,
            };
            let k = cfg.decoder_kernels[stage];
            stages.push(Stage {
                up: Upsample::new([d / prev_d, 2, 2])?,
                up_channels: prev_c,
                skip,
                conv: Conv3d::new(plan.stage_in_channels[stage], cfg.decoder_widths[stage], [k; 3], [1; 3], [k / 2; 3], rng)?,
                relu: Relu::new(),
            });
            prev_d = d;
            prev_c = cfg.decoder_widths[stage];
        }
        let head = Conv3d::new(prev_c, cfg.n_labels, [1; 3], [1; 3], [0; 3], rng)?;
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            bottleneck,
            stages,
            head,
        })
    }

    pub fn config(&self) -> &Pix2VoxConfig {
        &self.cfg
    }

    pub fn head_mut(&mut self) -> &mut Conv3d {
        &mut self.head
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let [h, w] = self.cfg.input_hw;
        if x.shape().len() != 4 || x.shape()[1..] != [1, h, w] {
            let b = x.shape().first().copied().unwrap_or(1);
            return Err(Error::shape("pix2vox", &[b, 1, h, w], x.shape()));
        }
        let feats = self.encoder.forward(x)?;
        let (conv, relu) = &mut self.bottleneck;
        let mut z = relu.forward(&conv.forward(feats.last().unwrap())?)?;
        for st in &mut self.stages {
            z = st.up.forward(&z)?;
            if let Some((level, conv, relu)) = &mut st.skip {
                let k = relu.forward(&conv.forward(&feats[*level])?)?;
                z = concat_channels(&z, &k)?;
            }
            z = st.relu.forward(&st.conv.forward(&z)?)?;
        }
        self.head.forward(&z)
    }

    /// Backpropagates `d loss / d logits`; returns the input gradient.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let levels = self.cfg.encoder_widths.len();
        let mut enc: Vec<Option<Tensor>> = vec![None; levels];
        let mut g = self.head.backward(grad)?;
        for st in self.stages.iter_mut().rev() {
            g = st.conv.backward(&st.relu.backward(&g)?)?;
            if let Some((level, conv, relu)) = &mut st.skip {
                let (gz, gk) = split_channels(&g, st.up_channels)?;
                enc[*level] = Some(conv.backward(&relu.backward(&gk)?)?);
                g = gz;
            }
            g = st.up.backward(&g)?;
        }
        let (conv, relu) = &mut self.bottleneck;
        let gb = conv.backward(&relu.backward(&g)?)?;
        enc[levels - 1] = Some(match enc[levels - 1].take() {
            Some(e) => add(e, &gb)?,
            None => gb,
        });
        self.encoder.backward(enc)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        p.extend(self.bottleneck.0.params());
        for st in &self.stages {
            if let Some((_, c, _)) = &st.skip {
                p.extend(c.params());
            }
            p.extend(st.conv.params());
        }
        p.extend(self.head.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.bottleneck.0.params_mut());
        for st in &mut self.stages {
            if let Some((_, c, _)) = &mut st.skip {
                p.extend(c.params_mut());
            }
            p.extend(st.conv.params_mut());
        }
        p.extend(self.head.params_mut());
        p
    }
}
