//! Localization and segmentation metrics: bounding boxes and per-face
//! detection offset error (DOE), Dice, and average symmetric surface
//! distance (ASSD).

mod report;
mod surface;

pub use report::{
    evaluate, evaluate_samples, Aggregates, AxisGroup, EvalConfig, EvalReport, EvalRow, LabelStats, MetricStats,
    Prediction, Stat,
};
pub use surface::{assd, squared_distance_transform, surface_voxels};

use crate::labels::keep_main_components;
use crate::{BoundingBox3D, Error, LabelVolume, Result, VoxelVolume};

/// Tight box over foreground voxel centres, in world millimetres.
pub fn mask_to_bbox(mask: &VoxelVolume) -> Result<BoundingBox3D> {
    mask.require_mask("mask_to_bbox")?;
    let g = mask.geometry();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for (o, &v) in mask.data().iter().enumerate() {
        if v != 0.0 {
            any = true;
            let idx = g.index_of(o);
            for a in 0..3 {
                lo[a] = lo[a].min(idx[a]);
                hi[a] = hi[a].max(idx[a]);
            }
        }
    }
    if !any {
        return Ok(BoundingBox3D::empty());
    }
    BoundingBox3D::from_extents(std::array::from_fn(|a| {
        [g.axis_to_world(a, lo[a] as f64), g.axis_to_world(a, hi[a] as f64)]
    }))
}

/// Absolute face-to-face distances in `Face::ALL` order; `None` when either
/// box is empty.
pub fn doe(pred: &BoundingBox3D, gt: &BoundingBox3D) -> Option<[f64; 6]> {
    if pred.empty || gt.empty {
        return None;
    }
    let (p, g) = (pred.faces(), gt.faces());
    Some(std::array::from_fn(|i| (p[i] - g[i]).abs()))
}

/// `2|P ∩ G| / (|P| + |G|)`; 1 when both are empty.
pub fn dice(pred: &VoxelVolume, gt: &VoxelVolume) -> Result<f64> {
    pred.require_mask("dice")?;
    gt.require_mask("dice")?;
    if pred.geometry() != gt.geometry() {
        return Err(Error::GeometryMismatch("dice inputs differ in geometry".into()));
    }
    let (mut p, mut g, mut both) = (0u64, 0u64, 0u64);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        let (a, b) = (a != 0.0, b != 0.0);
        p += a as u64;
        g += b as u64;
        both += (a && b) as u64;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (p + g) as f64)
}

/// Per-channel removal of small, isolated components.
pub fn postprocess_prediction(pred: &LabelVolume, min_fraction: f64) -> Result<LabelVolume> {
    pred.map_channels(|m| keep_main_components(m, min_fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Geometry, VolumeKind};

    fn single(g: Geometry, idx: [usize; 3]) -> VoxelVolume {
        let mut bits = vec![false; g.len()];
        bits[g.offset(idx[0], idx[1], idx[2])] = true;
        VoxelVolume::from_mask(g, &bits).unwrap()
    }

    #[test]
    fn bbox_of_single_voxel() {
        let g = Geometry::new([5, 5, 5], [1.0, 2.0, 3.0], [0.0; 3]).unwrap();
        let b = mask_to_bbox(&single(g, [2, 3, 4])).unwrap();
        assert_eq!(b.faces(), [2.0, 2.0, 6.0, 6.0, 12.0, 12.0]);
        assert!(!b.empty);
        let e = mask_to_bbox(&VoxelVolume::zeros(g, VolumeKind::BinaryMask)).unwrap();
        assert!(e.empty);
    }

    #[test]
    fn doe_cases() {
        let b = BoundingBox3D::from_extents([[0.0, 10.0], [5.0, 8.0], [-3.0, 3.0]]).unwrap();
        assert_eq!(doe(&b, &b), Some([0.0; 6]));
        assert_eq!(doe(&b.translated([5.0, 0.0, 0.0]), &b), Some([5.0, 5.0, 0.0, 0.0, 0.0, 0.0]));
        let grown = BoundingBox3D::from_extents([[-2.0, 12.0], [3.0, 10.0], [-5.0, 5.0]]).unwrap();
        assert_eq!(doe(&grown, &b), Some([2.0; 6]));
        assert_eq!(doe(&BoundingBox3D::empty(), &b), None);
    }

    #[test]
    fn dice_cases() {
        let g = Geometry::unit([4, 4, 4]).unwrap();
        let a = VoxelVolume::from_mask(g, &(0..64).map(|o| o < 8).collect::<Vec<_>>()).unwrap();
        let b = VoxelVolume::from_mask(g, &(0..64).map(|o| (4..12).contains(&o)).collect::<Vec<_>>()).unwrap();
        let c = VoxelVolume::from_mask(g, &(0..64).map(|o| o >= 56).collect::<Vec<_>>()).unwrap();
        let empty = VoxelVolume::zeros(g, VolumeKind::BinaryMask);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &c).unwrap(), 0.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice(&a, &empty).unwrap(), 0.0);
    }

    #[test]
    fn postprocess_keeps_single_component() {
        let g = Geometry::unit([6, 6, 6]).unwrap();
        let m = single(g, [1, 1, 1]);
        let lv = LabelVolume::new(g, vec![("liver".into(), m)]).unwrap();
        assert_eq!(postprocess_prediction(&lv, 0.1).unwrap(), lv);
    }
}
