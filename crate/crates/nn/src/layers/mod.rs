//! Layers with hand-written reverse mode. `forward` caches what `backward`
//! needs; `backward` takes the gradient of the output, accumulates parameter
//! gradients and returns the gradient of the input.

mod activation;
mod conv;
mod pool;
mod upsample;

pub use activation::{sigmoid, Relu, Sigmoid};
pub use conv::{Conv2d, Conv3d, Convert2dTo3d, ConvNd};
pub use pool::MaxPool2d;
pub use upsample::Upsample;

use crate::{Result, Tensor};

pub trait Layer {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor>;
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor>;

    fn params(&self) -> Vec<&Tensor> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }
}

pub(crate) fn missing_cache(op: &'static str) -> crate::Error {
    crate::Error::Config(format!("{op}: backward called before forward"))
}
