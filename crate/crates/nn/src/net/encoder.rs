use rand::Rng;

use crate::layers::{Conv2d, Layer, MaxPool2d, Relu};
use crate::{Error, Result, Tensor};

/// Levels of `convs_per_level` same-padded 3x3 conv + ReLU, with 2x2 max
/// pooling in front of every level but the first.
#[derive(Clone, Debug)]
pub struct Encoder {
    levels: Vec<Vec<(Conv2d, Relu)>>,
    pools: Vec<MaxPool2d>,
}

impl Encoder {
    pub fn new(in_c: usize, widths: &[usize], convs_per_level: usize, rng: &mut impl Rng) -> Result<Self> {
        if widths.is_empty() || convs_per_level == 0 {
            return Err(Error::Config("encoder needs at least one level and one conv per level".into()));
        }
        let mut levels = Vec::with_capacity(widths.len());
        let mut c = in_c;
        for &w in widths {
            let mut convs = Vec::with_capacity(convs_per_level);
            for _ in 0..convs_per_level {
                convs.push((Conv2d::new(c, w, [3, 3], [1, 1], [1, 1], rng)?, Relu::new()));
                c = w;
            }
            levels.push(convs);
        }
        Ok(Self {
            levels,
            pools: (1..widths.len()).map(|_| MaxPool2d::new()).collect(),
        })
    }

    /// Spatial size of each level for an input of `hw`; errors when a
    /// pooling step would see an odd extent.
    pub fn level_sizes(hw: [usize; 2], levels: usize) -> Result<Vec<[usize; 2]>> {
        let mut sizes = vec![hw];
        for _ in 1..levels {
            let [h, w] = *sizes.last().unwrap();
            if h % 2 != 0 || w % 2 != 0 {
                return Err(Error::Config(format!(
                    "input {hw:?} cannot be pooled {} times",
                    levels - 1
                )));
            }
            sizes.push([h / 2, w / 2]);
        }
        Ok(sizes)
    }

    /// Feature maps of every level, finest first.
    pub fn forward(&mut self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut feats: Vec<Tensor> = Vec::with_capacity(self.levels.len());
        for (l, convs) in self.levels.iter_mut().enumerate() {
            let mut h = if l == 0 { x.clone() } else { self.pools[l - 1].forward(&feats[l - 1])? };
            for (conv, relu) in convs.iter_mut() {
                h = relu.forward(&conv.forward(&h)?)?;
            }
            feats.push(h);
        }
        Ok(feats)
    }

    /// Takes the gradient arriving at each level's output and returns the
    /// gradient of the input.
    pub fn backward(&mut self, mut grads: Vec<Option<Tensor>>) -> Result<Tensor> {
        let n = self.levels.len();
        let mut carry: Option<Tensor> = None;
        for l in (0..n).rev() {
            let mut g = match (carry.take(), grads[l].take()) {
                (Some(a), Some(b)) => add(a, &b)?,
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => return Err(Error::Config(format!("no gradient reaches encoder level {l}"))),
            };
            for (conv, relu) in self.levels[l].iter_mut().rev() {
                g = conv.backward(&relu.backward(&g)?)?;
            }
            if l > 0 {
                carry = Some(self.pools[l - 1].backward(&g)?);
            } else {
                return Ok(g);
            }
        }
        unreachable!("encoder has at least one level")
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.levels.iter().flatten().flat_map(|(c, _)| c.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.levels.iter_mut().flatten().flat_map(|(c, _)| c.params_mut()).collect()
    }
}

pub(crate) fn add(mut a: Tensor, b: &Tensor) -> Result<Tensor> {
    a.expect_shape("add", b.shape())?;
    for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
        *x += y;
    }
    Ok(a)
}

/// `(b, c, h, w)` viewed as `(b, c, 1, h, w)`.
pub(crate) fn lift(x: Tensor) -> Result<Tensor> {
    let s = x.shape().to_vec();
    x.reshape(&[s[0], s[1], 1, s[2], s[3]])
}

pub(crate) fn flatten(x: Tensor) -> Result<Tensor> {
    let s = x.shape().to_vec();
    x.reshape(&[s[0], s[1], s[3], s[4]])
}
