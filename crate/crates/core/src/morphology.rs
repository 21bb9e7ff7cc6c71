//! Flat morphology with Euclidean structuring elements.
//!
//! Binary erosion treats everything outside the grid as background, so a
//! binary opening keeps exactly the union of ball placements that fit inside
//! the input. Grayscale operators take their extrema over the in-bounds part
//! of the disk only, which keeps constant images fixed.

use crate::{DepthImage, Result, VoxelVolume};

/// Integer offsets `v` with `|v|_2 <= radius`.
pub fn ball_offsets(radius: usize) -> Vec<[i64; 3]> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy + dz * dz <= r * r {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

pub fn disk_offsets(radius: usize) -> Vec<[i64; 2]> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push([dx, dy]);
            }
        }
    }
    out
}

fn binary_pass(mask: &[bool], shape: [usize; 3], radius: usize, erode: bool) -> Vec<bool> {
    let [nx, ny, nz] = shape;
    let offsets = ball_offsets(radius);
    let mut out = vec![false; mask.len()];
    let inside = |i: i64, n: usize| i >= 0 && (i as usize) < n;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let o = x + nx * (y + ny * z);
                // Erosion can only keep foreground; dilation only needs to
                // look around background.
                if erode && !mask[o] {
                    continue;
                }
                if !erode && mask[o] {
                    out[o] = true;
                    continue;
                }
                let mut hit = erode;
                for &[dx, dy, dz] in &offsets {
                    let (xi, yi, zi) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    let on = inside(xi, nx)
                        && inside(yi, ny)
                        && inside(zi, nz)
                        && mask[xi as usize + nx * (yi as usize + ny * zi as usize)];
                    if erode && !on {
                        hit = false;
                        break;
                    }
                    if !erode && on {
                        hit = true;
                        break;
                    }
                }
                out[o] = hit;
            }
        }
    }
    out
}

pub fn binary_erosion(mask: &[bool], shape: [usize; 3], radius: usize) -> Vec<bool> {
    binary_pass(mask, shape, radius, true)
}

pub fn binary_dilation(mask: &[bool], shape: [usize; 3], radius: usize) -> Vec<bool> {
    binary_pass(mask, shape, radius, false)
}

/// Erosion then dilation with the discrete ball; radius 0 is the identity.
pub fn binary_opening(mask: &VoxelVolume, radius_vox: usize) -> Result<VoxelVolume> {
    mask.require_mask("binary_opening")?;
    if radius_vox == 0 {
        return Ok(mask.clone());
    }
    let shape = mask.shape();
    let eroded = binary_erosion(&mask.to_bools(), shape, radius_vox);
    let opened = binary_dilation(&eroded, shape, radius_vox);
    VoxelVolume::from_mask(*mask.geometry(), &opened)
}

fn gray_pass(data: &[f32], shape: [usize; 2], radius: usize, erode: bool) -> Vec<f32> {
    let [nx, ny] = shape;
    let offsets = disk_offsets(radius);
    let mut out = vec![0.0; data.len()];
    for y in 0..ny {
        for x in 0..nx {
            let mut acc = if erode { f32::INFINITY } else { f32::NEG_INFINITY };
            for &[dx, dy] in &offsets {
                let (xi, yi) = (x as i64 + dx, y as i64 + dy);
                let inside = xi >= 0 && yi >= 0 && (xi as usize) < nx && (yi as usize) < ny;
                if !inside {
                    continue;
                }
                let v = data[xi as usize + nx * yi as usize];
                acc = if erode { acc.min(v) } else { acc.max(v) };
            }
            out[x + nx * y] = acc;
        }
    }
    out
}

pub fn grayscale_erosion(data: &[f32], shape: [usize; 2], radius: usize) -> Vec<f32> {
    gray_pass(data, shape, radius, true)
}

pub fn grayscale_dilation(data: &[f32], shape: [usize; 2], radius: usize) -> Vec<f32> {
    gray_pass(data, shape, radius, false)
}

/// Disk-neighbourhood minimum then maximum; radius 0 is the identity.
pub fn grayscale_opening(img: &DepthImage, radius_px: usize) -> Result<DepthImage> {
    if radius_px == 0 {
        return Ok(img.clone());
    }
    let eroded = grayscale_erosion(img.data(), img.shape(), radius_px);
    img.with_data(grayscale_dilation(&eroded, img.shape(), radius_px))
}
