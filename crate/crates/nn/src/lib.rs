//! A small CPU tensor engine with hand-written backward passes, the
//! depth-to-volume Pix2Vox network, a 2D U-Net, and their training loop.
//!
//! Tensors are row-major `(b, c, h, w)` or `(b, c, d, h, w)`. For the
//! volumetric network `h` is LR, `w` is SI and `d` is AP.

pub mod augment;
pub mod checkpoint;
pub mod data;
mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod net;
pub mod optim;
mod tensor;
pub mod train;

pub use checkpoint::{Checkpoint, Predictor};
pub use error::{Error, Result};
pub use tensor::{concat_channels, split_channels, Tensor};
