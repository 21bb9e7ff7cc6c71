//! Depth-sensor simulation from an intensity volume.
//!
//! The chain is: normalize to `[0, 1]`, threshold, binary opening, coronal
//! first-hit projection along AP, per-image renormalization, depth cutoff,
//! grayscale opening.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{read_volume, write_depth};
use crate::manifest::Manifest;
use crate::{DepthImage, Error, Result, VolumeKind, VoxelVolume};

pub use crate::morphology::{binary_opening, grayscale_opening};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthSynthConfig {
    pub intensity_threshold: f64,
    pub binary_opening_radius_vox: usize,
    pub depth_cutoff: f64,
    pub grayscale_opening_radius_px: usize,
}

impl Default for DepthSynthConfig {
    fn default() -> Self {
        Self {
            intensity_threshold: 0.02,
            binary_opening_radius_vox: 1,
            depth_cutoff: 0.3,
            grayscale_opening_radius_px: 1,
        }
    }
}

impl DepthSynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("intensity_threshold", self.intensity_threshold),
            ("depth_cutoff", self.depth_cutoff),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Param(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Min-max rescale to `[0, 1]`; a constant volume maps to zeros.
pub fn normalize_intensity(vol: &VoxelVolume) -> Result<VoxelVolume> {
    if vol.kind() != VolumeKind::Intensity {
        return Err(Error::Invariant("normalize_intensity expects an intensity volume".into()));
    }
    let (lo, hi) = vol
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let data = if hi > lo {
        let range = hi - lo;
        vol.data().iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; vol.data().len()]
    };
    VoxelVolume::new(*vol.geometry(), data, VolumeKind::Intensity)
}

/// Strict threshold: foreground where `value > t`.
pub fn threshold_mask(vol: &VoxelVolume, t: f64) -> Result<VoxelVolume> {
    let t = t as f32;
    let bits: Vec<bool> = vol.data().iter().map(|&v| v > t).collect();
    VoxelVolume::from_mask(*vol.geometry(), &bits)
}

/// First-hit proximity per `(lr, si)` column before renormalization:
/// `1 - j*/(n_ap - 1)` for the smallest foreground AP index `j*`, else 0.
pub fn render_depth_raw(mask: &VoxelVolume) -> Result<Vec<f32>> {
    mask.require_mask("render_depth_coronal")?;
    let [nx, ny, nz] = mask.shape();
    let data = mask.data();
    let denom = ny.saturating_sub(1).max(1) as f32;
    let mut raw = vec![0.0f32; nx * nz];
    for z in 0..nz {
        for x in 0..nx {
            if let Some(j) = (0..ny).find(|&y| data[x + nx * (y + ny * z)] != 0.0) {
                raw[x + nx * z] = 1.0 - j as f32 / denom;
            }
        }
    }
    Ok(raw)
}

/// Rescales the nonzero values of a raw depth map to `[0, 1]`. Zeros stay
/// zero; if every nonzero value is equal they all become 1.
pub fn renormalize_nonzero(raw: &[f32]) -> Vec<f32> {
    let (lo, hi) = raw
        .iter()
        .filter(|&&v| v != 0.0)
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    raw.iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else if hi > lo {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .collect()
}

/// Orthographic coronal depth image seen from the anterior side.
pub fn render_depth_coronal(mask: &VoxelVolume) -> Result<DepthImage> {
    let raw = render_depth_raw(mask)?;
    let [nx, _, nz] = mask.shape();
    let spacing = mask.geometry().spacing_mm();
    DepthImage::new([nx, nz], [spacing[0], spacing[2]], renormalize_nonzero(&raw))
}

/// Zeroes every pixel below `cutoff`.
pub fn depth_cutoff(img: &DepthImage, cutoff: f64) -> Result<DepthImage> {
    let c = cutoff as f32;
    img.with_data(img.data().iter().map(|&v| if v < c { 0.0 } else { v }).collect())
}

pub fn simulate_depth(vol: &VoxelVolume, cfg: &DepthSynthConfig) -> Result<DepthImage> {
    cfg.validate()?;
    let normalized = normalize_intensity(vol)?;
    let body = threshold_mask(&normalized, cfg.intensity_threshold)?;
    let body = binary_opening(&body, cfg.binary_opening_radius_vox)?;
    let depth = render_depth_coronal(&body)?;
    let depth = depth_cutoff(&depth, cfg.depth_cutoff)?;
    grayscale_opening(&depth, cfg.grayscale_opening_radius_px)
}

pub fn depth_file(seed: u64) -> String {
    format!("sample_{seed:08}_depth.vvol")
}

/// Renders a depth image next to every intensity volume of `manifest`,
/// records it in the items and saves the manifest. `jobs` worker threads;
/// the output does not depend on it.
pub fn render_manifest(manifest: &mut Manifest, cfg: &DepthSynthConfig, jobs: usize) -> Result<()> {
    cfg.validate()?;
    let render = |item: &crate::manifest::ManifestItem| -> Result<std::path::PathBuf> {
        let rel = item
            .intensity
            .as_ref()
            .ok_or_else(|| Error::Param(format!("sample {} has no intensity volume", item.id())))?;
        let depth = simulate_depth(&read_volume(&manifest.resolve(rel))?, cfg)?;
        let name = std::path::PathBuf::from(depth_file(item.seed));
        write_depth(&depth, &manifest.resolve(&name))?;
        Ok(name)
    };
    let paths = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Param(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| manifest.items.par_iter().map(render).collect::<Result<Vec<_>>>())?
    } else {
        manifest.items.iter().map(render).collect::<Result<Vec<_>>>()?
    };
    for (item, p) in manifest.items.iter_mut().zip(paths) {
        item.depth = Some(p);
    }
    manifest.save()?;
    Ok(())
}
