use super::{missing_cache, Layer};
use crate::{Error, Result, Tensor};

/// 2x2 max pooling with stride 2 over the last two axes. Ties go to the
/// first element in scan order.
#[derive(Clone, Debug, Default)]
pub struct MaxPool2d {
    argmax: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for MaxPool2d {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        if s.len() < 3 || s[s.len() - 2] % 2 != 0 || s[s.len() - 1] % 2 != 0 {
            return Err(Error::Config(format!("max pool needs even trailing extents, got {s:?}")));
        }
        let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
        let (ho, wo) = (h / 2, w / 2);
        let planes = x.len() / (h * w);
        let mut out = Vec::with_capacity(planes * ho * wo);
        let mut arg = Vec::with_capacity(planes * ho * wo);
        for p in 0..planes {
            let base = p * h * w;
            for i in 0..ho {
                for j in 0..wo {
                    let mut best = base + 2 * i * w + 2 * j;
                    for o in [base + 2 * i * w + 2 * j + 1, base + (2 * i + 1) * w + 2 * j, base + (2 * i + 1) * w + 2 * j + 1] {
                        if x.data()[o] > x.data()[best] {
                            best = o;
                        }
                    }
                    out.push(x.data()[best]);
                    arg.push(best);
                }
            }
        }
        let mut shape = s.to_vec();
        let r = shape.len();
        shape[r - 2] = ho;
        shape[r - 1] = wo;
        self.argmax = Some((arg, s.to_vec()));
        Tensor::new(&shape, out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (arg, in_shape) = self.argmax.as_ref().ok_or_else(|| missing_cache("max pool"))?;
        if grad_out.len() != arg.len() {
            return Err(Error::shape("max pool backward", &[arg.len()], grad_out.shape()));
        }
        let mut dx = vec![0.0f32; in_shape.iter().product()];
        for (&o, &g) in arg.iter().zip(grad_out.data()) {
            dx[o] += g;
        }
        Tensor::new(in_shape, dx)
    }
}
