//! Conversions between pipeline volumes and network tensors.
//!
//! Network inputs are `(1, LR, SI)` images. Volume targets are
//! `(label, AP, LR, SI)`; plane targets are `(label, rows, cols)` with the
//! plane's axes in `(LR, AP, SI)` order.

use serde::{Deserialize, Serialize};

use depthscout_core::io::{read_depth, read_labels};
use depthscout_core::manifest::Manifest;
use depthscout_core::{DepthImage, Geometry, LabelVolume, VoxelVolume};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    /// LR x SI, projected along AP.
    Coronal,
    /// AP x SI, projected along LR.
    Sagittal,
    /// LR x AP, projected along SI.
    Axial,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Coronal, Plane::Sagittal, Plane::Axial];

    /// Volume axes spanning the plane, as (rows, cols).
    pub fn axes(self) -> [usize; 2] {
        match self {
            Plane::Coronal => [0, 2],
            Plane::Sagittal => [1, 2],
            Plane::Axial => [0, 1],
        }
    }

    /// The axis collapsed by projection.
    pub fn normal(self) -> usize {
        match self {
            Plane::Coronal => 1,
            Plane::Sagittal => 0,
            Plane::Axial => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::Coronal => "coronal",
            Plane::Sagittal => "sagittal",
            Plane::Axial => "axial",
        }
    }

    pub fn shape(self, volume: [usize; 3]) -> [usize; 2] {
        let [r, c] = self.axes();
        [volume[r], volume[c]]
    }
}

/// What the network predicts for one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "plane")]
pub enum TargetKind {
    Volume,
    Plane(Plane),
}

impl TargetKind {
    /// Whether the target's trailing axes are `(LR, SI)`, so in-plane
    /// augmentation applies to it as well as to the input.
    pub fn follows_input_plane(self) -> bool {
        matches!(self, TargetKind::Volume | TargetKind::Plane(Plane::Coronal))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `LR x SI`, row-major.
    pub input: Vec<f32>,
    pub target: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub labels: Vec<String>,
    pub kind: TargetKind,
    pub input_hw: [usize; 2],
    /// Per-sample target shape, label axis first.
    pub target_shape: Vec<usize>,
    /// Geometry of the ground-truth volumes.
    pub geometry: Geometry,
}

pub fn depth_to_input(depth: &DepthImage) -> Vec<f32> {
    let [nl, ns] = depth.shape();
    (0..nl * ns).map(|o| depth.get(o / ns, o % ns)).collect()
}

/// `(label, AP, LR, SI)` bits; labels absent from `volume` are all zero.
pub fn volume_target(volume: &LabelVolume, labels: &[String]) -> Vec<u8> {
    let g = volume.geometry();
    let [nl, na, ns] = g.shape();
    let mut out = vec![0u8; labels.len() * g.len()];
    for (l, name) in labels.iter().enumerate() {
        let Some(ch) = volume.get(name) else { continue };
        let dst = &mut out[l * g.len()..(l + 1) * g.len()];
        for si in 0..ns {
            for ap in 0..na {
                for lr in 0..nl {
                    if ch.get(lr, ap, si) > 0.5 {
                        dst[(ap * nl + lr) * ns + si] = 1;
                    }
                }
            }
        }
    }
    out
}

/// Max-projection of one mask onto `plane`, row-major in the plane's axes.
pub fn project_mask(mask: &VoxelVolume, plane: Plane) -> Vec<bool> {
    let shape = mask.shape();
    let [r, c] = plane.axes();
    let [nr, nc] = plane.shape(shape);
    let mut out = vec![false; nr * nc];
    let g = mask.geometry();
    for (o, &v) in mask.data().iter().enumerate() {
        if v > 0.5 {
            let idx = g.index_of(o);
            out[idx[r] * nc + idx[c]] = true;
        }
    }
    out
}

/// `(label, rows, cols)` projection bits.
pub fn plane_target(volume: &LabelVolume, labels: &[String], plane: Plane) -> Vec<u8> {
    let [nr, nc] = plane.shape(volume.geometry().shape());
    let mut out = vec![0u8; labels.len() * nr * nc];
    for (l, name) in labels.iter().enumerate() {
        if let Some(ch) = volume.get(name) {
            for (d, p) in out[l * nr * nc..(l + 1) * nr * nc].iter_mut().zip(project_mask(ch, plane)) {
                *d = p as u8;
            }
        }
    }
    out
}

/// Thresholds `(label, AP, LR, SI)` logits at 0 (probability 0.5).
pub fn volume_from_logits(logits: &[f32], labels: &[String], geometry: Geometry) -> Result<LabelVolume> {
    let [nl, na, ns] = geometry.shape();
    if logits.len() != labels.len() * geometry.len() {
        return Err(Error::shape("volume_from_logits", &[labels.len(), na, nl, ns], &[logits.len()]));
    }
    let channels = labels
        .iter()
        .enumerate()
        .map(|(l, name)| {
            let src = &logits[l * geometry.len()..(l + 1) * geometry.len()];
            let mut bits = vec![false; geometry.len()];
            for (o, b) in bits.iter_mut().enumerate() {
                let [lr, ap, si] = geometry.index_of(o);
                *b = src[(ap * nl + lr) * ns + si] > 0.0;
            }
            Ok((name.clone(), VoxelVolume::from_mask(geometry, &bits)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelVolume::new(geometry, channels)?)
}

impl Dataset {
    /// Builds a dataset from `(id, depth, labels)` triples, converting each
    /// as it arrives. `labels` defaults to the first sample's channel names.
    pub fn from_samples(
        samples: impl IntoIterator<Item = Result<(String, DepthImage, LabelVolume)>>,
        kind: TargetKind,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let mut out = Vec::new();
        let mut labels = labels;
        let mut meta: Option<([usize; 2], Geometry)> = None;
        for sample in samples {
            let (id, depth, volume) = sample?;
            let names = labels.get_or_insert_with(|| volume.names().map(String::from).collect());
            let g = *volume.geometry();
            match &meta {
                None => meta = Some((depth.shape(), g)),
                Some((hw, g0)) => {
                    if *hw != depth.shape() || g0.shape() != g.shape() {
                        return Err(Error::Config(format!(
                            "sample {id} has depth {:?} / volume {:?}, expected {hw:?} / {:?}",
                            depth.shape(),
                            g.shape(),
                            g0.shape()
                        )));
                    }
                }
            }
            let target = match kind {
                TargetKind::Volume => volume_target(&volume, names),
                TargetKind::Plane(p) => plane_target(&volume, names, p),
            };
            out.push(Sample {
                id,
                input: depth_to_input(&depth),
                target,
            });
        }
        let Some((input_hw, geometry)) = meta else {
            return Err(Error::Config("training set has no samples".into()));
        };
        let labels = labels.unwrap_or_default();
        if labels.is_empty() {
            return Err(Error::Config("training labels are empty".into()));
        }
        if input_hw != [geometry.shape()[0], geometry.shape()[2]] {
            return Err(Error::Config(format!(
                "depth image {input_hw:?} does not match the LR x SI extent of the volumes {:?}",
                geometry.shape()
            )));
        }
        let shape = geometry.shape();
        let target_shape = match kind {
            TargetKind::Volume => vec![labels.len(), shape[1], shape[0], shape[2]],
            TargetKind::Plane(p) => {
                let [r, c] = p.shape(shape);
                vec![labels.len(), r, c]
            }
        };
        Ok(Self {
            samples: out,
            labels,
            kind,
            input_hw,
            target_shape,
            geometry,
        })
    }

    /// Loads every manifest item; each needs a depth image and labels.
    pub fn from_manifest(manifest: &Manifest, kind: TargetKind, labels: Option<Vec<String>>) -> Result<Self> {
        let items = manifest.items.iter().map(|item| {
            let (Some(d), Some(l)) = (&item.depth, &item.labels) else {
                return Err(Error::Config(format!(
                    "sample {} needs both a depth image and labels; run the depth step first",
                    item.id()
                )));
            };
            Ok((item.id(), read_depth(&manifest.resolve(d))?, read_labels(&manifest.resolve(l))?))
        });
        Self::from_samples(items, kind, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_target_layout() {
        let g = Geometry::unit([3, 2, 4]).unwrap();
        let mut bits = vec![false; g.len()];
        bits[g.offset(2, 1, 3)] = true;
        let lv = LabelVolume::new(g, vec![("liver".into(), VoxelVolume::from_mask(g, &bits).unwrap())]).unwrap();
        let labels = vec!["spleen".to_string(), "liver".to_string()];
        let t = volume_target(&lv, &labels);
        let on: Vec<usize> = t.iter().enumerate().filter(|(_, &v)| v == 1).map(|(i, _)| i).collect();
        assert_eq!(on, vec![24 + (1 * 3 + 2) * 4 + 3]);
        let logits: Vec<f32> = t.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        let back = volume_from_logits(&logits, &labels, g).unwrap();
        assert_eq!(back.get("liver").unwrap().to_bools(), bits);
        assert_eq!(back.get("spleen").unwrap().count_nonzero(), 0);
    }

    #[test]
    fn single_voxel_projections() {
        let g = Geometry::unit([3, 2, 4]).unwrap();
        let mut bits = vec![false; g.len()];
        bits[g.offset(2, 1, 3)] = true;
        let m = VoxelVolume::from_mask(g, &bits).unwrap();
        let cor = project_mask(&m, Plane::Coronal);
        assert_eq!(cor.iter().position(|&b| b), Some(2 * 4 + 3));
        assert_eq!(cor.iter().filter(|&&b| b).count(), 1);
        assert_eq!(project_mask(&m, Plane::Sagittal).iter().position(|&b| b), Some(1 * 4 + 3));
        assert_eq!(project_mask(&m, Plane::Axial).iter().position(|&b| b), Some(2 * 2 + 1));
    }
}
