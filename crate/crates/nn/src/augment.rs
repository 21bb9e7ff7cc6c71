//! In-plane (LR-SI) random affine augmentation shared by depth images and
//! label volumes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use depthscout_core::{DepthImage, LabelVolume, VoxelVolume};

use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Largest shift as a fraction of the image extent on each axis.
    pub max_shift_fraction: f64,
    pub scale_range: (f64, f64),
    pub max_rotation_deg: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_shift_fraction: 0.1,
            scale_range: (0.9, 1.1),
            max_rotation_deg: 10.0,
        }
    }
}

/// `out = c + scale * R(rotation) * (in - c) + shift` in `(lr, si)` pixel
/// coordinates, `c` being the image centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InPlaneTransform {
    pub shift_px: [f64; 2],
    pub scale: f64,
    pub rotation_deg: f64,
}

impl InPlaneTransform {
    pub fn identity() -> Self {
        Self {
            shift_px: [0.0, 0.0],
            scale: 1.0,
            rotation_deg: 0.0,
        }
    }

    pub fn sample(cfg: &AugmentConfig, shape: [usize; 2], rng: &mut impl Rng) -> Self {
        let mut sym = |m: f64| if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
        let shift_px = [
            sym(cfg.max_shift_fraction * shape[0] as f64),
            sym(cfg.max_shift_fraction * shape[1] as f64),
        ];
        let rotation_deg = sym(cfg.max_rotation_deg);
        let (lo, hi) = cfg.scale_range;
        let scale = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        Self { shift_px, scale, rotation_deg }
    }

    /// Source coordinate sampled by output pixel `p`.
    pub fn source(&self, p: [usize; 2], shape: [usize; 2]) -> [f64; 2] {
        let c = [(shape[0] as f64 - 1.0) / 2.0, (shape[1] as f64 - 1.0) / 2.0];
        let d = [p[0] as f64 - c[0] - self.shift_px[0], p[1] as f64 - c[1] - self.shift_px[1]];
        if self.rotation_deg == 0.0 && self.scale == 1.0 {
            return [c[0] + d[0], c[1] + d[1]];
        }
        let (s, co) = self.rotation_deg.to_radians().sin_cos();
        [
            c[0] + (co * d[0] + s * d[1]) / self.scale,
            c[1] + (-s * d[0] + co * d[1]) / self.scale,
        ]
    }
}

/// Bilinear warp of a row-major `shape[0] x shape[1]` image, zero outside.
pub fn warp_bilinear(img: &[f32], shape: [usize; 2], t: &InPlaneTransform) -> Vec<f32> {
    let [h, w] = shape;
    let at = |i: i64, j: i64| -> f32 {
        if i < 0 || j < 0 || i >= h as i64 || j >= w as i64 {
            0.0
        } else {
            img[i as usize * w + j as usize]
        }
    };
    let mut out = vec![0.0f32; h * w];
    for i in 0..h {
        for j in 0..w {
            let [y, x] = t.source([i, j], shape);
            let (y0, x0) = (y.floor(), x.floor());
            let (fy, fx) = ((y - y0) as f32, (x - x0) as f32);
            let (y0, x0) = (y0 as i64, x0 as i64);
            let mut v = at(y0, x0) * (1.0 - fy) * (1.0 - fx);
            if fx != 0.0 {
                v += at(y0, x0 + 1) * (1.0 - fy) * fx;
            }
            if fy != 0.0 {
                v += at(y0 + 1, x0) * fy * (1.0 - fx);
                if fx != 0.0 {
                    v += at(y0 + 1, x0 + 1) * fy * fx;
                }
            }
            out[i * w + j] = v;
        }
    }
    out
}

/// Nearest-neighbour warp applied identically to consecutive
/// `shape[0] x shape[1]` planes, zero outside.
pub fn warp_nearest<T: Copy + Default>(planes: &[T], shape: [usize; 2], t: &InPlaneTransform) -> Vec<T> {
    let [h, w] = shape;
    let map: Vec<Option<usize>> = (0..h * w)
        .map(|o| {
            let [y, x] = t.source([o / w, o % w], shape);
            let (y, x) = ((y + 0.5).floor(), (x + 0.5).floor());
            (y >= 0.0 && x >= 0.0 && y < h as f64 && x < w as f64).then(|| y as usize * w + x as usize)
        })
        .collect();
    let mut out = vec![T::default(); planes.len()];
    for (src, dst) in planes.chunks(h * w).zip(out.chunks_mut(h * w)) {
        for (d, m) in dst.iter_mut().zip(&map) {
            if let Some(s) = m {
                *d = src[*s];
            }
        }
    }
    out
}

/// Applies `t` to a depth image and, slice by slice along AP, to every label
/// channel.
pub fn apply_transform(depth: &DepthImage, labels: &LabelVolume, t: &InPlaneTransform) -> Result<(DepthImage, LabelVolume)> {
    let [nl, ns] = depth.shape();
    // Depth storage is LR-fastest; warp in (lr, si) row-major order.
    let rows: Vec<f32> = (0..nl * ns).map(|o| depth.get(o / ns, o % ns)).collect();
    let warped = warp_bilinear(&rows, [nl, ns], t);
    let mut data = vec![0.0f32; nl * ns];
    for (o, v) in warped.into_iter().enumerate() {
        data[o / ns + nl * (o % ns)] = v.clamp(0.0, 1.0);
    }
    let depth = depth.with_data(data)?;
    let g = *labels.geometry();
    let [lx, ly, lz] = g.shape();
    let labels = labels.map_channels(|ch| {
        // (ap, lr, si) planes.
        let planes: Vec<u8> = (0..ly * lx * lz)
            .map(|o| {
                let (ap, rest) = (o / (lx * lz), o % (lx * lz));
                (ch.get(rest / lz, ap, rest % lz) > 0.5) as u8
            })
            .collect();
        let warped = warp_nearest(&planes, [lx, lz], t);
        let mut bits = vec![false; g.len()];
        for (o, &v) in warped.iter().enumerate() {
            let (ap, rest) = (o / (lx * lz), o % (lx * lz));
            bits[g.offset(rest / lz, ap, rest % lz)] = v != 0;
        }
        VoxelVolume::from_mask(g, &bits)
    })?;
    Ok((depth, labels))
}

/// Draws one transform and applies it to both inputs.
pub fn augment(depth: &DepthImage, labels: &LabelVolume, rng: &mut impl Rng, cfg: &AugmentConfig) -> Result<(DepthImage, LabelVolume)> {
    let t = InPlaneTransform::sample(cfg, depth.shape(), rng);
    apply_transform(depth, labels, &t)
}
