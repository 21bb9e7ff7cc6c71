use crate::{Error, Result};

/// Dense row-major `f32` array with an optional gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
    grad: Option<Vec<f32>>,
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!("tensor shape {shape:?} has a zero extent")));
        }
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::shape("tensor", shape, &[data.len()]));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f32) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
            grad: None,
            requires_grad: false,
        }
    }

    /// A trainable tensor with a zeroed gradient.
    pub fn param(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        let mut t = Self::new(shape, data)?;
        t.requires_grad = true;
        t.grad = Some(vec![0.0; t.data.len()]);
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    /// Gradient accumulator, allocated on first use.
    pub fn grad_mut(&mut self) -> &mut [f32] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![0.0; n])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.fill(0.0);
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() || shape.iter().any(|&n| n == 0) {
            return Err(Error::shape("reshape", shape, &self.shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub(crate) fn expect_rank(&self, op: &'static str, rank: usize) -> Result<()> {
        if self.shape.len() != rank {
            return Err(Error::Shape {
                op,
                expected: vec![0; rank],
                found: self.shape.clone(),
            });
        }
        Ok(())
    }

    pub(crate) fn expect_shape(&self, op: &'static str, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::shape(op, shape, &self.shape));
        }
        Ok(())
    }
}

/// Concatenates two `(b, c, ...)` tensors along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape.len() < 2 || a.shape.len() != b.shape.len() || a.shape[0] != b.shape[0] || a.shape[2..] != b.shape[2..] {
        return Err(Error::shape("concat", &a.shape, &b.shape));
    }
    let (n, ca, cb) = (a.shape[0], a.shape[1], b.shape[1]);
    let inner: usize = a.shape[2..].iter().product();
    let mut data = Vec::with_capacity(a.len() + b.len());
    for i in 0..n {
        data.extend_from_slice(&a.data[i * ca * inner..(i + 1) * ca * inner]);
        data.extend_from_slice(&b.data[i * cb * inner..(i + 1) * cb * inner]);
    }
    let mut shape = a.shape.clone();
    shape[1] = ca + cb;
    Tensor::new(&shape, data)
}

/// Inverse of [`concat_channels`]: splits off the first `ca` channels.
pub fn split_channels(t: &Tensor, ca: usize) -> Result<(Tensor, Tensor)> {
    if t.shape.len() < 2 || ca == 0 || ca >= t.shape[1] {
        return Err(Error::shape("split", &[0, ca], &t.shape));
    }
    let (n, c) = (t.shape[0], t.shape[1]);
    let cb = c - ca;
    let inner: usize = t.shape[2..].iter().product();
    let (mut a, mut b) = (Vec::with_capacity(n * ca * inner), Vec::with_capacity(n * cb * inner));
    for i in 0..n {
        let s = &t.data[i * c * inner..(i + 1) * c * inner];
        a.extend_from_slice(&s[..ca * inner]);
        b.extend_from_slice(&s[ca * inner..]);
    }
    let mut sa = t.shape.clone();
    sa[1] = ca;
    let mut sb = t.shape.clone();
    sb[1] = cb;
    Ok((Tensor::new(&sa, a)?, Tensor::new(&sb, b)?))
}
