mod encoder;
mod pix2vox;
mod unet2d;

pub use encoder::Encoder;
pub use pix2vox::{Conversion, Pix2Vox, Pix2VoxConfig, Pix2VoxPlan, SkipConversion};
pub use unet2d::{UNet2d, UNet2dConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Result, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Pix2vox(Pix2VoxConfig),
    Unet2d(UNet2dConfig),
}

impl ModelConfig {
    pub fn n_labels(&self) -> usize {
        match self {
            ModelConfig::Pix2vox(c) => c.n_labels,
            ModelConfig::Unet2d(c) => c.n_labels,
        }
    }

    pub fn input_hw(&self) -> [usize; 2] {
        match self {
            ModelConfig::Pix2vox(c) => c.input_hw,
            ModelConfig::Unet2d(c) => c.input_hw,
        }
    }

    /// Per-sample output shape without the batch axis.
    pub fn output_shape(&self) -> Vec<usize> {
        match self {
            ModelConfig::Pix2vox(c) => vec![c.n_labels, c.output_shape[0], c.output_shape[1], c.output_shape[2]],
            ModelConfig::Unet2d(c) => vec![c.n_labels, c.output_hw[0], c.output_hw[1]],
        }
    }
}

#[derive(Clone, Debug)]
pub enum Network {
    Pix2Vox(Pix2Vox),
    UNet2d(UNet2d),
}

impl Network {
    /// Builds the network with weights drawn from `seed`.
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match cfg {
            ModelConfig::Pix2vox(c) => Network::Pix2Vox(Pix2Vox::new(c, &mut rng)?),
            ModelConfig::Unet2d(c) => Network::UNet2d(UNet2d::new(c, &mut rng)?),
        })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Network::Pix2Vox(n) => ModelConfig::Pix2vox(n.config().clone()),
            Network::UNet2d(n) => ModelConfig::Unet2d(n.config().clone()),
        }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        match self {
            Network::Pix2Vox(n) => n.forward(x),
            Network::UNet2d(n) => n.forward(x),
        }
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        match self {
            Network::Pix2Vox(n) => n.backward(grad),
            Network::UNet2d(n) => n.backward(grad),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Network::Pix2Vox(n) => n.params(),
            Network::UNet2d(n) => n.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Network::Pix2Vox(n) => n.params_mut(),
            Network::UNet2d(n) => n.params_mut(),
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
