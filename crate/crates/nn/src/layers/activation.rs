use super::{missing_cache, Layer};
use crate::{Error, Result, Tensor};

#[derive(Clone, Debug, Default)]
pub struct Relu {
    active: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.active = Some(x.data().iter().map(|&v| v > 0.0).collect());
        Tensor::new(x.shape(), x.data().iter().map(|&v| v.max(0.0)).collect())
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let active = self.active.as_ref().ok_or_else(|| missing_cache("relu"))?;
        if active.len() != grad_out.len() {
            return Err(Error::shape("relu backward", &[active.len()], grad_out.shape()));
        }
        let g = grad_out.data().iter().zip(active).map(|(&g, &a)| if a { g } else { 0.0 }).collect();
        Tensor::new(grad_out.shape(), g)
    }
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, Default)]
pub struct Sigmoid {
    out: Option<Vec<f32>>,
}

impl Sigmoid {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Sigmoid {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y: Vec<f32> = x.data().iter().map(|&v| sigmoid(v)).collect();
        self.out = Some(y.clone());
        Tensor::new(x.shape(), y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let y = self.out.as_ref().ok_or_else(|| missing_cache("sigmoid"))?;
        if y.len() != grad_out.len() {
            return Err(Error::shape("sigmoid backward", &[y.len()], grad_out.shape()));
        }
        let g = grad_out.data().iter().zip(y).map(|(&g, &s)| g * s * (1.0 - s)).collect();
        Tensor::new(grad_out.shape(), g)
    }
}
