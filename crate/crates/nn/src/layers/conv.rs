use matrixmultiply::sgemm;
use rand::Rng;

use super::{missing_cache, Layer};
use crate::{Error, Result, Tensor};

/// `out (m x n) = beta * out + a (m x k) * b (k x n)` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f32], rsa: usize, csa: usize, b: &[f32], rsb: usize, csb: usize, beta: f32, c: &mut [f32]) {
    assert!(m > 0 && k > 0 && n > 0);
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index sgemm touches.
    unsafe {
        sgemm(
            m, k, n, 1.0,
            a.as_ptr(), rsa as isize, csa as isize,
            b.as_ptr(), rsb as isize, csb as isize,
            beta,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// Cross-correlation over three spatial axes of a `(b, c, d, h, w)` input.
/// Weights are `(out_c, in_c, kd, kh, kw)`.
#[derive(Clone, Debug)]
pub struct ConvNd {
    pub weight: Tensor,
    pub bias: Tensor,
    kernel: [usize; 3],
    stride: [usize; 3],
    pad: [usize; 3],
    input: Option<Tensor>,
}

impl ConvNd {
    pub fn new(in_c: usize, out_c: usize, kernel: [usize; 3], stride: [usize; 3], pad: [usize; 3], rng: &mut impl Rng) -> Result<Self> {
        if in_c == 0 || out_c == 0 || kernel.contains(&0) || stride.contains(&0) {
            return Err(Error::Config(format!(
                "conv needs positive sizes: in {in_c}, out {out_c}, kernel {kernel:?}, stride {stride:?}"
            )));
        }
        let fan_in = in_c * kernel.iter().product::<usize>();
        let bound = (6.0 / fan_in as f64).sqrt();
        let w: Vec<f32> = (0..out_c * fan_in).map(|_| rng.gen_range(-bound..bound) as f32).collect();
        let mut shape = vec![out_c, in_c];
        shape.extend_from_slice(&kernel);
        Ok(Self {
            weight: Tensor::param(&shape, w)?,
            bias: Tensor::param(&[out_c], vec![0.0; out_c])?,
            kernel,
            stride,
            pad,
            input: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> [usize; 3] {
        self.kernel
    }

    pub fn stride(&self) -> [usize; 3] {
        self.stride
    }

    pub fn pad(&self) -> [usize; 3] {
        self.pad
    }

    /// `floor((in + 2 pad - kernel) / stride) + 1` per axis, or `None` when
    /// the kernel does not fit.
    pub fn output_size(&self, input: [usize; 3]) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for a in 0..3 {
            let span = input[a] + 2 * self.pad[a];
            if span < self.kernel[a] {
                return None;
            }
            out[a] = (span - self.kernel[a]) / self.stride[a] + 1;
        }
        Some(out)
    }

    fn pointwise(&self) -> bool {
        self.kernel == [1, 1, 1] && self.stride == [1, 1, 1] && self.pad == [0, 0, 0]
    }

    fn dims(&self, x: &[usize]) -> Result<([usize; 3], [usize; 3])> {
        let c = self.in_channels();
        if x.len() != 5 || x[1] != c {
            let mut expected = vec![x.first().copied().unwrap_or(1), c];
            expected.extend_from_slice(x.get(2..5).unwrap_or(&[0, 0, 0]));
            return Err(Error::shape("conv", &expected, x));
        }
        let ind = [x[2], x[3], x[4]];
        let outd = self.output_size(ind).ok_or_else(|| Error::Shape {
            op: "conv",
            expected: self.kernel.to_vec(),
            found: x.to_vec(),
        })?;
        Ok((ind, outd))
    }

    /// Valid `ox` range for kernel column `kx`: `ix = ox * stride + kx - pad`
    /// stays inside `[0, n)`.
    fn ox_range(&self, kx: usize, n: usize, out: usize) -> (usize, usize) {
        let (s, p) = (self.stride[2], self.pad[2]);
        let lo = if kx >= p { 0 } else { (p - kx).div_ceil(s) };
        let hi = if n + p > kx { ((n + p - kx - 1) / s + 1).min(out) } else { 0 };
        (lo, hi.max(lo))
    }

    fn im2col(&self, x: &[f32], ind: [usize; 3], outd: [usize; 3], col: &mut [f32]) {
        let [kd, kh, kw] = self.kernel;
        let p = outd.iter().product::<usize>();
        let q = ind.iter().product::<usize>();
        let sx = self.stride[2];
        let mut row = 0;
        for ci in 0..self.in_channels() {
            let xc = &x[ci * q..(ci + 1) * q];
            for kz in 0..kd {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let (lo, hi) = self.ox_range(kx, ind[2], outd[2]);
                        let dst = &mut col[row * p..(row + 1) * p];
                        for oz in 0..outd[0] {
                            let iz = (oz * self.stride[0] + kz) as isize - self.pad[0] as isize;
                            for oy in 0..outd[1] {
                                let iy = (oy * self.stride[1] + ky) as isize - self.pad[1] as isize;
                                let d = &mut dst[(oz * outd[1] + oy) * outd[2]..(oz * outd[1] + oy + 1) * outd[2]];
                                if iz < 0 || iz as usize >= ind[0] || iy < 0 || iy as usize >= ind[1] || lo >= hi {
                                    d.fill(0.0);
                                    continue;
                                }
                                let base = (iz as usize * ind[1] + iy as usize) * ind[2];
                                d[..lo].fill(0.0);
                                d[hi..].fill(0.0);
                                let start = base + lo * sx + kx - self.pad[2];
                                if sx == 1 {
                                    d[lo..hi].copy_from_slice(&xc[start..start + hi - lo]);
                                } else {
                                    for (o, v) in d[lo..hi].iter_mut().enumerate() {
                                        *v = xc[start + o * sx];
                                    }
                                }
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[f32], ind: [usize; 3], outd: [usize; 3], dx: &mut [f32]) {
        let [kd, kh, kw] = self.kernel;
        let p = outd.iter().product::<usize>();
        let q = ind.iter().product::<usize>();
        let sx = self.stride[2];
        let mut row = 0;
        for ci in 0..self.in_channels() {
            let xc = &mut dx[ci * q..(ci + 1) * q];
            for kz in 0..kd {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let (lo, hi) = self.ox_range(kx, ind[2], outd[2]);
                        let src = &col[row * p..(row + 1) * p];
                        row += 1;
                        if lo >= hi {
                            continue;
                        }
                        for oz in 0..outd[0] {
                            let iz = (oz * self.stride[0] + kz) as isize - self.pad[0] as isize;
                            if iz < 0 || iz as usize >= ind[0] {
                                continue;
                            }
                            for oy in 0..outd[1] {
                                let iy = (oy * self.stride[1] + ky) as isize - self.pad[1] as isize;
                                if iy < 0 || iy as usize >= ind[1] {
                                    continue;
                                }
                                let base = (iz as usize * ind[1] + iy as usize) * ind[2];
                                let s = &src[(oz * outd[1] + oy) * outd[2]..(oz * outd[1] + oy + 1) * outd[2]];
                                let start = base + lo * sx + kx - self.pad[2];
                                if sx == 1 {
                                    for (d, v) in xc[start..start + hi - lo].iter_mut().zip(&s[lo..hi]) {
                                        *d += v;
                                    }
                                } else {
                                    for (o, v) in s[lo..hi].iter().enumerate() {
                                        xc[start + o * sx] += v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

impl Layer for ConvNd {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (ind, outd) = self.dims(x.shape())?;
        let (b, c, f) = (x.shape()[0], self.in_channels(), self.out_channels());
        let (q, p) = (ind.iter().product::<usize>(), outd.iter().product::<usize>());
        let ck = c * self.kernel.iter().product::<usize>();
        let mut out = vec![0.0f32; b * f * p];
        let mut col = if self.pointwise() { Vec::new() } else { vec![0.0f32; ck * p] };
        for n in 0..b {
            let xn = &x.data()[n * c * q..(n + 1) * c * q];
            let cols: &[f32] = if self.pointwise() {
                xn
            } else {
                self.im2col(xn, ind, outd, &mut col);
                &col
            };
            let on = &mut out[n * f * p..(n + 1) * f * p];
            for (fi, row) in on.chunks_mut(p).enumerate() {
                row.fill(self.bias.data()[fi]);
            }
            gemm(f, ck, p, self.weight.data(), ck, 1, cols, p, 1, 1.0, on);
        }
        self.input = Some(x.clone());
        Tensor::new(&[b, f, outd[0], outd[1], outd[2]], out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.input.take().ok_or_else(|| missing_cache("conv"))?;
        let (ind, outd) = self.dims(x.shape())?;
        let (b, c, f) = (x.shape()[0], self.in_channels(), self.out_channels());
        grad_out.expect_shape("conv backward", &[b, f, outd[0], outd[1], outd[2]])?;
        let (q, p) = (ind.iter().product::<usize>(), outd.iter().product::<usize>());
        let ck = c * self.kernel.iter().product::<usize>();
        let mut dx = vec![0.0f32; x.len()];
        let mut col = if self.pointwise() { Vec::new() } else { vec![0.0f32; ck * p] };
        let mut dcol = vec![0.0f32; ck * p];
        for n in 0..b {
            let xn = &x.data()[n * c * q..(n + 1) * c * q];
            let gn = &grad_out.data()[n * f * p..(n + 1) * f * p];
            let cols: &[f32] = if self.pointwise() {
                xn
            } else {
                self.im2col(xn, ind, outd, &mut col);
                &col
            };
            gemm(f, p, ck, gn, p, 1, cols, 1, p, 1.0, self.weight.grad_mut());
            let db = self.bias.grad_mut();
            for (fi, row) in gn.chunks(p).enumerate() {
                db[fi] += row.iter().sum::<f32>();
            }
            let dxn = &mut dx[n * c * q..(n + 1) * c * q];
            if self.pointwise() {
                gemm(ck, f, p, self.weight.data(), 1, ck, gn, p, 1, 0.0, dxn);
            } else {
                gemm(ck, f, p, self.weight.data(), 1, ck, gn, p, 1, 0.0, &mut dcol);
                self.col2im(&dcol, ind, outd, dxn);
            }
        }
        let out = Tensor::new(x.shape(), dx);
        self.input = Some(x);
        out
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// 3D convolution on `(b, c, d, h, w)`.
pub type Conv3d = ConvNd;

/// 2D convolution on `(b, c, h, w)`, run as a depth-1 3D convolution.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub inner: ConvNd,
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, kernel: [usize; 2], stride: [usize; 2], pad: [usize; 2], rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            inner: ConvNd::new(
                in_c,
                out_c,
                [1, kernel[0], kernel[1]],
                [1, stride[0], stride[1]],
                [0, pad[0], pad[1]],
                rng,
            )?,
        })
    }

    pub fn output_size(&self, input: [usize; 2]) -> Option<[usize; 2]> {
        self.inner.output_size([1, input[0], input[1]]).map(|o| [o[1], o[2]])
    }
}

fn lift(x: &Tensor, op: &'static str) -> Result<Tensor> {
    x.expect_rank(op, 4)?;
    let s = x.shape();
    x.clone().reshape(&[s[0], s[1], 1, s[2], s[3]])
}

fn drop_depth(y: Tensor) -> Result<Tensor> {
    let s = y.shape().to_vec();
    y.reshape(&[s[0], s[1], s[3], s[4]])
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.inner.forward(&lift(x, "conv2d")?)?;
        drop_depth(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let dx = self.inner.backward(&lift(grad_out, "conv2d backward")?)?;
        drop_depth(dx)
    }

    fn params(&self) -> Vec<&Tensor> {
        self.inner.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.inner.params_mut()
    }
}

/// Turns `(b, c, h, w)` features into `(b, f, d, h, w)` by viewing the
/// channel axis as depth and convolving along it with a `(k, 1, 1)` kernel.
#[derive(Clone, Debug)]
pub struct Convert2dTo3d {
    pub conv: ConvNd,
}

impl Convert2dTo3d {
    pub fn new(k: usize, s: usize, f: usize, pad: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            conv: ConvNd::new(1, f, [k, 1, 1], [s, 1, 1], [pad, 0, 0], rng)?,
        })
    }

    /// Output depth for `c` input channels.
    pub fn output_depth(&self, c: usize) -> Option<usize> {
        self.conv.output_size([c, 1, 1]).map(|o| o[0])
    }
}

impl Layer for Convert2dTo3d {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        x.expect_rank("convert2d3d", 4)?;
        let s = x.shape();
        self.conv.forward(&x.clone().reshape(&[s[0], 1, s[1], s[2], s[3]])?)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let dx = self.conv.backward(grad_out)?;
        let s = dx.shape().to_vec();
        dx.reshape(&[s[0], s[2], s[3], s[4]])
    }

    fn params(&self) -> Vec<&Tensor> {
        self.conv.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.conv.params_mut()
    }
}
