use depthscout_core::manifest::Manifest;
use depthscout_core::{BoundingBox3D, DepthImage, Geometry, LabelVolume};
use depthscout_nn::data::{project_mask, Dataset, Plane, TargetKind};
use depthscout_nn::net::{ModelConfig, UNet2dConfig};
use depthscout_nn::train::{train, TrainConfig, TrainOutputs};
use depthscout_nn::{Checkpoint, Predictor};

/// Per-label 2D masks on one anatomical plane, row-major in the plane's
/// axes, with the 3D geometry they were projected from.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneProjection {
    pub plane: Plane,
    pub geometry: Geometry,
    pub masks: Vec<(String, Vec<bool>)>,
}

/// Max-projection of every label along the plane normal.
pub fn project_labels(labels: &LabelVolume, plane: Plane) -> PlaneProjection {
    PlaneProjection {
        plane,
        geometry: *labels.geometry(),
        masks: labels.channels().iter().map(|(n, m)| (n.clone(), project_mask(m, plane))).collect(),
    }
}

impl PlaneProjection {
    pub fn shape(&self) -> [usize; 2] {
        self.plane.shape(self.geometry.shape())
    }

    pub fn get(&self, label: &str) -> Option<&[bool]> {
        self.masks.iter().find(|(n, _)| n == label).map(|(_, m)| m.as_slice())
    }

    /// World extents `[[lo, hi]; 2]` of a label along the plane's two axes;
    /// `None` when the label is missing or empty.
    pub fn extents(&self, label: &str) -> Option<[[f64; 2]; 2]> {
        let mask = self.get(label)?;
        let [_, nc] = self.shape();
        let (mut lo, mut hi, mut any) = ([usize::MAX; 2], [0usize; 2], false);
        for (o, _) in mask.iter().enumerate().filter(|(_, &b)| b) {
            any = true;
            let idx = [o / nc, o % nc];
            for a in 0..2 {
                lo[a] = lo[a].min(idx[a]);
                hi[a] = hi[a].max(idx[a]);
            }
        }
        if !any {
            return None;
        }
        let axes = self.plane.axes();
        Some(std::array::from_fn(|a| {
            [
                self.geometry.axis_to_world(axes[a], lo[a] as f64),
                self.geometry.axis_to_world(axes[a], hi[a] as f64),
            ]
        }))
    }

    /// Extent along a volume axis, if this plane spans it.
    fn axis_extent(&self, label: &str, axis: usize) -> Option<[f64; 2]> {
        let slot = self.plane.axes().iter().position(|&a| a == axis)?;
        self.extents(label).map(|e| e[slot])
    }
}

/// Boxes from three plane projections. Each axis is seen by two planes:
/// faces are the mean of both when both see the label, the single
/// non-empty plane's when only one does, and the box is empty when neither
/// does. Labels follow the coronal projection's order, then any others.
pub fn combine_projections(
    coronal: &PlaneProjection,
    sagittal: &PlaneProjection,
    axial: &PlaneProjection,
) -> Vec<(String, BoundingBox3D)> {
    let planes = [coronal, sagittal, axial];
    let mut labels: Vec<&str> = Vec::new();
    for p in planes {
        for (n, _) in &p.masks {
            if !labels.contains(&n.as_str()) {
                labels.push(n);
            }
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let mut extents = [[0.0; 2]; 3];
            for (axis, e) in extents.iter_mut().enumerate() {
                let seen: Vec<[f64; 2]> = planes.iter().filter_map(|p| p.axis_extent(label, axis)).collect();
                *e = match seen.as_slice() {
                    [a, b] => [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0],
                    [a] => *a,
                    _ => return (label.to_string(), BoundingBox3D::empty()),
                };
            }
            let b = BoundingBox3D::from_extents(extents).unwrap_or_else(|_| BoundingBox3D::empty());
            (label.to_string(), b)
        })
        .collect()
}

/// Trains one plane's 2D network on a manifest with depth images and
/// labels. The model config's sizes are filled in from the data.
pub fn train_plane_model(
    plane: Plane,
    manifest: &Manifest,
    model: &UNet2dConfig,
    cfg: &TrainConfig,
    out: &TrainOutputs,
) -> depthscout_nn::Result<Checkpoint> {
    let data = Dataset::from_manifest(manifest, TargetKind::Plane(plane), None)?;
    let model = UNet2dConfig {
        input_hw: data.input_hw,
        n_labels: data.labels.len(),
        output_hw: [data.target_shape[1], data.target_shape[2]],
        ..model.clone()
    };
    train(&data, &ModelConfig::Unet2d(model), cfg, out, None, None)
}

/// Runs a plane network on one depth image.
pub fn predict_projection(predictor: &mut Predictor, depth: &DepthImage) -> depthscout_nn::Result<PlaneProjection> {
    let TargetKind::Plane(plane) = predictor.target else {
        return Err(depthscout_nn::Error::Config("checkpoint does not predict a plane projection".into()));
    };
    let logits = predictor.logits(depth)?;
    let ps = depth.pixel_spacing_mm();
    let g0 = predictor.geometry;
    let geometry = Geometry::new(g0.shape(), [ps[0], g0.spacing_mm()[1], ps[1]], g0.origin_mm())?;
    let [nr, nc] = plane.shape(geometry.shape());
    let masks = predictor
        .labels
        .iter()
        .enumerate()
        .map(|(l, name)| (name.clone(), logits[l * nr * nc..(l + 1) * nr * nc].iter().map(|&v| v > 0.0).collect()))
        .collect();
    Ok(PlaneProjection { plane, geometry, masks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use depthscout_core::metrics::mask_to_bbox;
    use depthscout_core::VoxelVolume;

    fn single(g: Geometry, bits: Vec<bool>) -> LabelVolume {
        LabelVolume::new(g, vec![("liver".into(), VoxelVolume::from_mask(g, &bits).unwrap())]).unwrap()
    }

    #[test]
    fn consistent_projections_reproduce_box() {
        let g = Geometry::new([5, 4, 6], [1.5, 2.0, 3.0], [-4.0, 1.0, 2.0]).unwrap();
        let bits: Vec<bool> = (0..g.len()).map(|o| o % 7 == 3 || o % 11 == 0).collect();
        let lv = single(g, bits);
        let boxes = combine_projections(
            &project_labels(&lv, Plane::Coronal),
            &project_labels(&lv, Plane::Sagittal),
            &project_labels(&lv, Plane::Axial),
        );
        assert_eq!(boxes[0].1, mask_to_bbox(lv.get("liver").unwrap()).unwrap());
    }

    #[test]
    fn disagreeing_planes_average() {
        let g = Geometry::unit([30, 4, 6]).unwrap();
        let mut a = vec![false; g.len()];
        let mut b = vec![false; g.len()];
        for lr in 10..=20 {
            a[g.offset(lr, 1, 2)] = true;
        }
        for lr in 12..=22 {
            b[g.offset(lr, 1, 2)] = true;
        }
        let (la, lb) = (single(g, a), single(g, b));
        let boxes = combine_projections(
            &project_labels(&la, Plane::Coronal),
            &project_labels(&la, Plane::Sagittal),
            &project_labels(&lb, Plane::Axial),
        );
        let bx = boxes[0].1;
        assert_eq!((bx.left, bx.right), (11.0, 21.0));
    }

    #[test]
    fn empty_everywhere_is_empty_box() {
        let g = Geometry::unit([3, 3, 3]).unwrap();
        let lv = single(g, vec![false; 27]);
        let boxes = combine_projections(
            &project_labels(&lv, Plane::Coronal),
            &project_labels(&lv, Plane::Sagittal),
            &project_labels(&lv, Plane::Axial),
        );
        assert!(boxes[0].1.empty);
    }

    #[test]
    fn full_volume_projects_to_full_plane() {
        let g = Geometry::unit([3, 2, 4]).unwrap();
        let p = project_labels(&single(g, vec![true; 24]), Plane::Sagittal);
        assert_eq!(p.masks[0].1, vec![true; 8]);
    }
}
