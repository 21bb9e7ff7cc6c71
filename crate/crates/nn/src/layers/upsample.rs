use super::{missing_cache, Layer};
use crate::{Error, Result, Tensor};

/// Separable linear upsampling of `(b, c, d, h, w)` by a factor of 1 or 2
/// per spatial axis, sampling at pixel centres with edge clamping.
#[derive(Clone, Debug)]
pub struct Upsample {
    factors: [usize; 3],
    in_shape: Option<Vec<usize>>,
}

/// Source taps `(i0, i1, weight of i1)` for each output index.
fn taps(n: usize, factor: usize) -> Vec<(usize, usize, f32)> {
    (0..n * factor)
        .map(|i| {
            if factor == 1 {
                return (i, i, 0.0);
            }
            let src = ((i as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, (src - i0 as f64) as f32)
        })
        .collect()
}

/// Resamples axis `axis` of a 5D tensor described by `shape`.
fn along(data: &[f32], shape: &[usize; 5], axis: usize, factor: usize) -> (Vec<f32>, [usize; 5]) {
    let n = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let t = taps(n, factor);
    let mut out = vec![0.0f32; outer * n * factor * inner];
    for o in 0..outer {
        let src = &data[o * n * inner..(o + 1) * n * inner];
        let dst = &mut out[o * n * factor * inner..(o + 1) * n * factor * inner];
        if inner == 1 {
            for (d, &(i0, i1, l)) in dst.iter_mut().zip(&t) {
                *d = (1.0 - l) * src[i0] + l * src[i1];
            }
            continue;
        }
        for (i, &(i0, i1, l)) in t.iter().enumerate() {
            let (a, b) = (&src[i0 * inner..(i0 + 1) * inner], &src[i1 * inner..(i1 + 1) * inner]);
            for ((d, &x0), &x1) in dst[i * inner..(i + 1) * inner].iter_mut().zip(a).zip(b) {
                *d = (1.0 - l) * x0 + l * x1;
            }
        }
    }
    let mut s = *shape;
    s[axis] *= factor;
    (out, s)
}

/// Transpose of [`along`]: `shape` is the input shape of the forward pass.
fn along_back(grad: &[f32], shape: &[usize; 5], axis: usize, factor: usize) -> Vec<f32> {
    let n = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let t = taps(n, factor);
    let mut dx = vec![0.0f32; outer * n * inner];
    for o in 0..outer {
        let g = &grad[o * n * factor * inner..(o + 1) * n * factor * inner];
        let d = &mut dx[o * n * inner..(o + 1) * n * inner];
        if inner == 1 {
            for (&gv, &(i0, i1, l)) in g.iter().zip(&t) {
                d[i0] += (1.0 - l) * gv;
                d[i1] += l * gv;
            }
            continue;
        }
        for (i, &(i0, i1, l)) in t.iter().enumerate() {
            let gi = &g[i * inner..(i + 1) * inner];
            for (k, &gv) in gi.iter().enumerate() {
                d[i0 * inner + k] += (1.0 - l) * gv;
                d[i1 * inner + k] += l * gv;
            }
        }
    }
    dx
}

impl Upsample {
    pub fn new(factors: [usize; 3]) -> Result<Self> {
        if factors.iter().any(|&f| f != 1 && f != 2) {
            return Err(Error::Config(format!("upsample factors must be 1 or 2, got {factors:?}")));
        }
        Ok(Self { factors, in_shape: None })
    }

    pub fn factors(&self) -> [usize; 3] {
        self.factors
    }

    fn shape5(x: &Tensor) -> Result<[usize; 5]> {
        x.expect_rank("upsample", 5)?;
        let s = x.shape();
        Ok([s[0], s[1], s[2], s[3], s[4]])
    }
}

impl Layer for Upsample {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut shape = Self::shape5(x)?;
        let mut data = x.data().to_vec();
        for a in 0..3 {
            if self.factors[a] == 2 {
                (data, shape) = along(&data, &shape, a + 2, 2);
            }
        }
        self.in_shape = Some(x.shape().to_vec());
        Tensor::new(&shape, data)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let in_shape = self.in_shape.clone().ok_or_else(|| missing_cache("upsample"))?;
        let mut shapes = vec![[in_shape[0], in_shape[1], in_shape[2], in_shape[3], in_shape[4]]];
        for a in 0..3 {
            let mut s = *shapes.last().unwrap();
            s[a + 2] *= self.factors[a];
            shapes.push(s);
        }
        grad_out.expect_shape("upsample backward", &shapes[3])?;
        let mut g = grad_out.data().to_vec();
        for a in (0..3).rev() {
            if self.factors[a] == 2 {
                g = along_back(&g, &shapes[a], a + 2, 2);
            }
        }
        Tensor::new(&in_shape, g)
    }
}
