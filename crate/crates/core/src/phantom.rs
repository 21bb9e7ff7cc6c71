//! Deterministic synthetic bodies with embedded organ labels.
//!
//! A phantom is a superellipsoid torso lying supine on a thin table slab.
//! Two scale factors are drawn per seed: a build factor that scales the LR
//! and AP half-axes and a height factor that scales the SI half-axis. The
//! torso rests on the table (its posterior surface touches the slab) and its
//! superior end is pinned near the top of the field of view, so the torso
//! centre is an affine function of the half-axes `h`.
//!
//! Organ `k` is an ellipsoid with centre
//!
//! ```text
//! c_k = torso_center(h) + A_k (h - h_mean) + b_k,   A_k = diag(p_k),  b_k = p_k * h_mean
//! ```
//!
//! and radii `r_k * h`, where `p_k` and `r_k` come from [`ORGAN_TEMPLATES`].
//! Organ voxels are clipped to the torso interior (`q <= 0.8`) and claimed in
//! label order, so organs are pairwise disjoint and strictly inside the body.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`: two uniform draws
//! for the scale factors, then one draw per voxel (LR fastest) for noise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{write_labels, write_volume};
use crate::manifest::{Manifest, ManifestItem};
use crate::{Error, Geometry, LabelVolume, Result, VolumeKind, VoxelVolume, LABEL_NAMES};

/// Torso interior level that organs must respect.
pub const ORGAN_INTERIOR: f64 = 0.8;

/// Mean torso half-axes as fractions of the grid shape.
pub const MEAN_HALF_AXES: [f64; 3] = [0.34, 0.34, 0.40];

pub const TORSO_INTENSITY: f64 = 0.6;
pub const ORGAN_INTENSITY: f64 = 0.9;
pub const TABLE_INTENSITY: f64 = 0.3;
pub const BACKGROUND_MAX: f64 = 0.01;
pub const TABLE_THICKNESS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrganTemplate {
    /// Position in torso units: `-1..1` per axis (left/anterior/inferior negative).
    pub position: [f64; 3],
    /// Radii as fractions of the torso half-axes.
    pub radii: [f64; 3],
}

const fn organ(position: [f64; 3], radii: [f64; 3]) -> OrganTemplate {
    OrganTemplate { position, radii }
}

const VERT_L: [f64; 3] = [0.07, 0.1, 0.035];
const VERT_T: [f64; 3] = [0.07, 0.1, 0.03];

/// One template per entry of [`LABEL_NAMES`], in the same order.
pub const ORGAN_TEMPLATES: [OrganTemplate; 41] = [
    organ([-0.45, 0.2, 0.15], [0.15, 0.25, 0.08]),   // spleen
    organ([0.3, 0.45, 0.0], [0.1, 0.18, 0.09]),      // kidney right
    organ([-0.3, 0.45, 0.02], [0.1, 0.18, 0.09]),    // kidney left
    organ([0.3, -0.05, 0.2], [0.3, 0.45, 0.1]),      // liver
    organ([-0.25, -0.2, 0.18], [0.17, 0.3, 0.08]),   // stomach
    organ([-0.05, 0.15, 0.08], [0.2, 0.12, 0.04]),   // pancreas
    organ([0.3, 0.0, 0.5], [0.22, 0.5, 0.17]),       // lung right
    organ([-0.3, 0.0, 0.5], [0.22, 0.5, 0.17]),      // lung left
    organ([0.0, -0.3, 0.75], [0.05, 0.08, 0.12]),    // trachea
    organ([0.0, -0.35, 0.85], [0.08, 0.06, 0.04]),   // thyroid gland
    organ([0.1, 0.05, 0.02], [0.08, 0.1, 0.04]),     // duodenum
    organ([0.0, -0.3, -0.75], [0.12, 0.2, 0.06]),    // urinary bladder
    organ([-0.05, 0.35, 0.2], [0.04, 0.08, 0.35]),   // aorta
    organ([-0.08, -0.25, 0.42], [0.2, 0.35, 0.1]),   // heart
    organ([0.0, 0.25, 0.55], [0.04, 0.06, 0.2]),     // esophagus
    organ([-0.55, 0.5, 0.6], [0.1, 0.06, 0.12]),     // scapula left
    organ([0.55, 0.5, 0.6], [0.1, 0.06, 0.12]),      // scapula right
    organ([-0.35, -0.4, 0.82], [0.2, 0.04, 0.03]),   // clavicula left
    organ([0.35, -0.4, 0.82], [0.2, 0.04, 0.03]),    // clavicula right
    organ([-0.3, 0.0, -0.9], [0.08, 0.15, 0.08]),    // femur left
    organ([0.3, 0.0, -0.9], [0.08, 0.15, 0.08]),     // femur right
    organ([-0.35, 0.1, -0.6], [0.15, 0.25, 0.1]),    // hip left
    organ([0.35, 0.1, -0.6], [0.15, 0.25, 0.1]),     // hip right
    organ([0.0, 0.5, -0.55], [0.08, 0.1, 0.08]),     // sacrum
    organ([0.0, 0.6, -0.4], VERT_L),                 // vertebrae L5
    organ([0.0, 0.6, -0.32], VERT_L),
    organ([0.0, 0.6, -0.24], VERT_L),
    organ([0.0, 0.6, -0.16], VERT_L),
    organ([0.0, 0.6, -0.08], VERT_L),                // vertebrae L1
    organ([0.0, 0.6, 0.0], VERT_T),                  // vertebrae_T12
    organ([0.0, 0.6, 0.07], VERT_T),
    organ([0.0, 0.6, 0.14], VERT_T),
    organ([0.0, 0.6, 0.21], VERT_T),
    organ([0.0, 0.6, 0.28], VERT_T),
    organ([0.0, 0.6, 0.35], VERT_T),
    organ([0.0, 0.6, 0.42], VERT_T),
    organ([0.0, 0.6, 0.49], VERT_T),
    organ([0.0, 0.6, 0.56], VERT_T),
    organ([0.0, 0.6, 0.63], VERT_T),
    organ([0.0, 0.6, 0.7], VERT_T),
    organ([0.0, 0.6, 0.77], VERT_T),                 // vertebrae_T1
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomParams {
    pub seed: u64,
    pub shape: [usize; 3],
    pub n_organs: usize,
    pub body_scale_range: (f64, f64),
    pub noise_amplitude: f64,
    pub spacing_mm: [f64; 3],
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            seed: 0,
            shape: [64, 32, 64],
            n_organs: 8,
            body_scale_range: (0.8, 1.2),
            noise_amplitude: 0.05,
            spacing_mm: [7.0, 10.0, 12.0],
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_organs > LABEL_NAMES.len() {
            return Err(Error::Param(format!(
                "n_organs is {}, at most {} structures exist",
                self.n_organs,
                LABEL_NAMES.len()
            )));
        }
        if self.shape.iter().any(|&n| n < 16) {
            return Err(Error::Param(format!(
                "every phantom dimension must be >= 16, got {:?}",
                self.shape
            )));
        }
        let (lo, hi) = self.body_scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.25) {
            return Err(Error::Param(format!(
                "body_scale_range must satisfy 0 < min <= max <= 1.25, got {:?}",
                self.body_scale_range
            )));
        }
        if !(self.noise_amplitude >= 0.0) {
            return Err(Error::Param("noise_amplitude must be >= 0".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.shape, self.spacing_mm, [0.0; 3])
    }

    pub fn mean_half_axes(&self) -> [f64; 3] {
        std::array::from_fn(|a| MEAN_HALF_AXES[a] * self.shape[a] as f64)
    }

    /// AP index of the first table row.
    pub fn table_top(&self) -> usize {
        self.shape[1] - 1 - TABLE_THICKNESS
    }

    /// Torso centre (voxel units) for given half-axes.
    pub fn torso_center(&self, half_axes: [f64; 3]) -> [f64; 3] {
        let [nx, _, nz] = self.shape;
        [
            (nx as f64 - 1.0) / 2.0,
            self.table_top() as f64 - 0.5 - half_axes[1],
            nz as f64 - 3.5 - half_axes[2],
        ]
    }

    /// Organ centre (voxel units) as an affine function of the half-axes.
    pub fn organ_center(&self, organ: usize, half_axes: [f64; 3]) -> [f64; 3] {
        let t = self.torso_center(half_axes);
        let mean = self.mean_half_axes();
        let p = ORGAN_TEMPLATES[organ].position;
        std::array::from_fn(|a| t[a] + p[a] * (half_axes[a] - mean[a]) + p[a] * mean[a])
    }

    pub fn organ_radii(&self, organ: usize, half_axes: [f64; 3]) -> [f64; 3] {
        let r = ORGAN_TEMPLATES[organ].radii;
        std::array::from_fn(|a| r[a] * half_axes[a])
    }

    /// Half-axes for a pair of scale factors.
    pub fn half_axes(&self, build: f64, height: f64) -> [f64; 3] {
        let m = self.mean_half_axes();
        [m[0] * build, m[1] * build, m[2] * height]
    }
}

/// Body shape level: `<= 1` inside the torso.
fn torso_level(p: [f64; 3], center: [f64; 3], half_axes: [f64; 3]) -> f64 {
    let u = (p[0] - center[0]) / half_axes[0];
    let v = (p[1] - center[1]) / half_axes[1];
    let w = (p[2] - center[2]) / half_axes[2];
    let w2 = w * w;
    u * u + v * v + w2 * w2
}

/// Everything a phantom draw determines, before rasterization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomShape {
    pub build: f64,
    pub height: f64,
    pub half_axes: [f64; 3],
    pub center: [f64; 3],
}

fn lerp(range: (f64, f64), t: f64) -> f64 {
    range.0 + (range.1 - range.0) * t
}

/// Intensity volume and organ labels for `params.seed`.
pub fn generate_phantom(params: &PhantomParams) -> Result<(VoxelVolume, LabelVolume)> {
    params.validate()?;
    let geometry = params.geometry()?;
    let [nx, ny, nz] = params.shape;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let build = lerp(params.body_scale_range, rng.gen::<f64>());
    let height = lerp(params.body_scale_range, rng.gen::<f64>());
    let half_axes = params.half_axes(build, height);
    let center = params.torso_center(half_axes);

    let organs: Vec<([f64; 3], [f64; 3])> = (0..params.n_organs)
        .map(|k| (params.organ_center(k, half_axes), params.organ_radii(k, half_axes)))
        .collect();
    let table = params.table_top()..params.table_top() + TABLE_THICKNESS;

    let amp = params.noise_amplitude;
    let mut intensity = vec![0.0f32; geometry.len()];
    let mut owner: Vec<Option<u8>> = vec![None; geometry.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let o = geometry.offset(x, y, z);
                let p = [x as f64, y as f64, z as f64];
                let noise = rng.gen::<f64>();
                let level = torso_level(p, center, half_axes);
                let value = if level <= 1.0 {
                    if level <= ORGAN_INTERIOR {
                        owner[o] = organs.iter().position(|(c, r)| {
                            let d: f64 = (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum();
                            d <= 1.0
                        }).map(|k| k as u8);
                    }
                    let base = if owner[o].is_some() { ORGAN_INTENSITY } else { TORSO_INTENSITY };
                    base + amp * (2.0 * noise - 1.0)
                } else if table.contains(&y) {
                    TABLE_INTENSITY + amp * (2.0 * noise - 1.0)
                } else {
                    amp.min(BACKGROUND_MAX) * noise
                };
                intensity[o] = value.clamp(0.0, 1.0) as f32;
            }
        }
    }

    let channels = (0..params.n_organs)
        .map(|k| {
            let bits: Vec<bool> = owner.iter().map(|&w| w == Some(k as u8)).collect();
            Ok((LABEL_NAMES[k].to_string(), VoxelVolume::from_mask(geometry, &bits)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        VoxelVolume::new(geometry, intensity, VolumeKind::Intensity)?,
        LabelVolume::new(geometry, channels)?,
    ))
}

/// The geometric draw of [`generate_phantom`] without rasterizing.
pub fn phantom_shape(params: &PhantomParams) -> Result<PhantomShape> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let build = lerp(params.body_scale_range, rng.gen::<f64>());
    let height = lerp(params.body_scale_range, rng.gen::<f64>());
    let half_axes = params.half_axes(build, height);
    Ok(PhantomShape {
        build,
        height,
        half_axes,
        center: params.torso_center(half_axes),
    })
}

/// Torso mask of a phantom, for containment checks.
pub fn torso_mask(params: &PhantomParams) -> Result<VoxelVolume> {
    let shape = phantom_shape(params)?;
    let geometry = params.geometry()?;
    let bits: Vec<bool> = (0..geometry.len())
        .map(|o| {
            let [x, y, z] = geometry.index_of(o);
            torso_level([x as f64, y as f64, z as f64], shape.center, shape.half_axes) <= 1.0
        })
        .collect();
    VoxelVolume::from_mask(geometry, &bits)
}

pub fn intensity_file(seed: u64) -> String {
    format!("sample_{seed:08}_intensity.vvol")
}

pub fn labels_file(seed: u64) -> String {
    format!("sample_{seed:08}_labels.vvol")
}

/// Writes `n` phantoms with seeds `base_seed..base_seed + n` and then the
/// manifest. `jobs` worker threads; output does not depend on it.
pub fn generate_dataset(
    n: usize,
    base_seed: u64,
    params: &PhantomParams,
    out_dir: &Path,
    jobs: usize,
) -> Result<Manifest> {
    params.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let seeds: Vec<u64> = (0..n as u64).map(|i| base_seed + i).collect();
    let write_one = |&seed: &u64| -> Result<ManifestItem> {
        let p = PhantomParams { seed, ..params.clone() };
        let (intensity, labels) = generate_phantom(&p)?;
        let (fi, fl) = (intensity_file(seed), labels_file(seed));
        write_volume(&intensity, &out_dir.join(&fi))?;
        write_labels(&labels, &out_dir.join(&fl))?;
        Ok(ManifestItem {
            seed,
            intensity: Some(fi.into()),
            labels: Some(fl.into()),
            depth: None,
            boxes: None,
        })
    };
    let items = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Param(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| seeds.par_iter().map(write_one).collect::<Result<Vec<_>>>())?
    } else {
        seeds.iter().map(write_one).collect::<Result<Vec<_>>>()?
    };
    let manifest = Manifest::new(
        out_dir,
        items,
        serde_json::json!({
            "n": n,
            "base_seed": base_seed,
            "phantom": PhantomParams { seed: base_seed, ..params.clone() },
        }),
    );
    manifest.save()?;
    Ok(manifest)
}
