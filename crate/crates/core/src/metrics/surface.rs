//! Surface extraction and exact anisotropic Euclidean distance transforms.

use crate::{Error, Geometry, Result, VoxelVolume};

/// Foreground voxels with at least one 6-neighbour in the background; the
/// outside of the grid counts as background.
pub fn surface_voxels(mask: &[bool], shape: [usize; 3]) -> Vec<bool> {
    let [nx, ny, nz] = shape;
    let at = |x: usize, y: usize, z: usize| mask[x + nx * (y + ny * z)];
    let mut out = vec![false; mask.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !at(x, y, z) {
                    continue;
                }
                let exposed = x == 0
                    || y == 0
                    || z == 0
                    || x + 1 == nx
                    || y + 1 == ny
                    || z + 1 == nz
                    || !at(x - 1, y, z)
                    || !at(x + 1, y, z)
                    || !at(x, y - 1, z)
                    || !at(x, y + 1, z)
                    || !at(x, y, z - 1)
                    || !at(x, y, z + 1);
                out[x + nx * (y + ny * z)] = exposed;
            }
        }
    }
    out
}

/// One pass of the lower-envelope transform along a line:
/// `out[q] = min_p (spacing * (q - p))^2 + f[p]`.
fn envelope_1d(f: &[f64], spacing2: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        let key = |p: usize| f[p] + spacing2 * (p * p) as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = (key(q) - key(p)) / (2.0 * spacing2 * (q - p) as f64);
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *slot = spacing2 * d * d + f[v[k]];
    }
}

/// Squared distance (mm²) from every voxel centre to the nearest `true`
/// voxel; `INFINITY` everywhere if there is none.
pub fn squared_distance_transform(features: &[bool], geometry: &Geometry) -> Vec<f64> {
    let shape = geometry.shape();
    let spacing = geometry.spacing_mm();
    let mut dist: Vec<f64> = features
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let strides = [1, shape[0], shape[0] * shape[1]];
    let (mut v, mut z) = (Vec::new(), Vec::new());
    for axis in 0..3 {
        let n = shape[axis];
        let s2 = spacing[axis] * spacing[axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        for start in 0..dist.len() {
            // Visit each line once, from its first element.
            if (start / strides[axis]) % n != 0 {
                continue;
            }
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = dist[start + i * strides[axis]];
            }
            envelope_1d(&line, s2, &mut out, &mut v, &mut z);
            for (i, &d) in out.iter().enumerate() {
                dist[start + i * strides[axis]] = d;
            }
        }
    }
    dist
}

/// Average symmetric surface distance in mm, or `None` if either mask is
/// empty.
pub fn assd(pred: &VoxelVolume, gt: &VoxelVolume) -> Result<Option<f64>> {
    pred.require_mask("assd")?;
    gt.require_mask("assd")?;
    let geometry = pred.geometry();
    if geometry != gt.geometry() {
        return Err(Error::GeometryMismatch("assd inputs differ in geometry".into()));
    }
    let shape = geometry.shape();
    let sp = surface_voxels(&pred.to_bools(), shape);
    let sg = surface_voxels(&gt.to_bools(), shape);
    let (np, ng) = (sp.iter().filter(|&&b| b).count(), sg.iter().filter(|&&b| b).count());
    if np == 0 || ng == 0 {
        return Ok(None);
    }
    let to_g = squared_distance_transform(&sg, geometry);
    let to_p = squared_distance_transform(&sp, geometry);
    let mut total = 0.0;
    for (o, _) in sp.iter().enumerate().filter(|(_, &b)| b) {
        total += to_g[o].sqrt();
    }
    for (o, _) in sg.iter().enumerate().filter(|(_, &b)| b) {
        total += to_p[o].sqrt();
    }
    Ok(Some(total / (np + ng) as f64))
}
