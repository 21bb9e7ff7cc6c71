//! Criteria on the deterministic kernels: depth rendering, openings,
//! metrics and the 2.5D box combination.

use depthscout_baselines::{combine_projections, project_labels};
use depthscout_core::depthsynth::{render_depth_coronal, render_depth_raw};
use depthscout_core::metrics::{assd, dice, doe, mask_to_bbox};
use depthscout_core::morphology::{binary_opening, grayscale_opening};
use depthscout_core::{DepthImage, Geometry, LabelVolume, VoxelVolume};
use depthscout_nn::data::Plane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Check;

fn random_mask(rng: &mut ChaCha8Rng, g: Geometry) -> VoxelVolume {
    let density = [0.0, 0.02, 0.2, 0.5, 0.9][rng.gen_range(0..5)];
    VoxelVolume::from_mask(g, &(0..g.len()).map(|_| rng.gen_bool(density)).collect::<Vec<_>>()).unwrap()
}

fn random_geometry(rng: &mut ChaCha8Rng, max: usize) -> Geometry {
    let shape: [usize; 3] = std::array::from_fn(|_| rng.gen_range(1..=max));
    let spacing: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.3..5.0));
    let origin: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-100.0..100.0));
    Geometry::new(shape, spacing, origin).unwrap()
}

/// First foreground voxel of every (lr, si) column, anterior first, then
/// min-max rescaling of the nonzero values.
fn scan(mask: &VoxelVolume) -> (Vec<f32>, Vec<f32>) {
    let [nx, ny, nz] = mask.shape();
    let mut raw = vec![0.0f32; nx * nz];
    for si in 0..nz {
        for lr in 0..nx {
            if let Some(ap) = (0..ny).find(|&ap| mask.get(lr, ap, si) == 1.0) {
                raw[lr + nx * si] = 1.0 - ap as f32 / (ny.max(2) - 1) as f32;
            }
        }
    }
    let lo = raw.iter().copied().filter(|&v| v > 0.0).fold(f32::INFINITY, f32::min);
    let hi = raw.iter().copied().fold(0.0f32, f32::max);
    let norm = raw
        .iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else if hi == lo {
                1.0
            } else {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        })
        .collect();
    (raw, norm)
}

pub fn depth_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc1);
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let mut pixels = 0;
    for case in 0..1000 {
        let g = random_geometry(&mut rng, 16);
        let mask = random_mask(&mut rng, g);
        let (raw, norm) = scan(&mask);
        let got_raw = render_depth_raw(&mask).map_err(|e| e.to_string())?;
        let got = render_depth_coronal(&mask).map_err(|e| e.to_string())?;
        ensure!(bits(&got_raw) == bits(&raw), "raw depth differs from the scan in case {case}");
        ensure!(bits(got.data()) == bits(&norm), "normalized depth differs from the scan in case {case}");
        pixels += raw.len();
    }
    Ok(format!("{pixels} pixels identical"))
}

pub fn openings() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc2);
    let mut removed = 0;
    for case in 0..500 {
        let g = Geometry::unit(std::array::from_fn(|_| rng.gen_range(1..12))).unwrap();
        let density = rng.gen_range(0.2..0.95);
        let m = VoxelVolume::from_mask(g, &(0..g.len()).map(|_| rng.gen_bool(density)).collect::<Vec<_>>()).unwrap();
        let r = rng.gen_range(0..3);
        let once = binary_opening(&m, r).unwrap();
        let twice = binary_opening(&once, r).unwrap();
        ensure!(once.data() == twice.data(), "binary opening not idempotent in case {case} (r = {r})");
        let inside = once.data().iter().zip(m.data()).all(|(o, i)| *o <= *i);
        ensure!(inside, "binary opening added voxels in case {case}");
        removed += m.count_nonzero() - once.count_nonzero();
    }
    for case in 0..500 {
        let shape = [rng.gen_range(1..16), rng.gen_range(1..16)];
        let levels = rng.gen_range(2..6);
        let data = (0..shape[0] * shape[1]).map(|_| rng.gen_range(0..levels) as f32 / levels as f32).collect();
        let img = DepthImage::new(shape, [1.0, 1.0], data).unwrap();
        let r = rng.gen_range(0..3);
        let once = grayscale_opening(&img, r).unwrap();
        let twice = grayscale_opening(&once, r).unwrap();
        ensure!(once.data() == twice.data(), "grayscale opening not idempotent in case {case} (r = {r})");
        ensure!(
            once.data().iter().zip(img.data()).all(|(o, i)| o <= i),
            "grayscale opening raised a pixel in case {case}"
        );
    }
    Ok(format!("binary openings removed {removed} voxels in total"))
}

fn dice_oracle(a: &VoxelVolume, b: &VoxelVolume) -> f64 {
    let (a, b) = (a.to_bools(), b.to_bools());
    let na = a.iter().filter(|&&v| v).count();
    let nb = b.iter().filter(|&&v| v).count();
    let both = a.iter().zip(&b).filter(|(&x, &y)| x && y).count();
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

/// Foreground voxels with a 6-neighbour outside, as mm offsets from the origin.
fn surface(m: &VoxelVolume) -> Vec<[f64; 3]> {
    let g = m.geometry();
    let s = g.shape().map(|n| n as i64);
    let on = |p: [i64; 3]| (0..3).all(|a| (0..s[a]).contains(&p[a])) && m.get(p[0] as usize, p[1] as usize, p[2] as usize) == 1.0;
    let steps = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    (0..g.len())
        .map(|o| g.index_of(o).map(|v| v as i64))
        .filter(|&i| on(i) && steps.iter().any(|d| !on([i[0] + d[0], i[1] + d[1], i[2] + d[2]])))
        .map(|i| std::array::from_fn(|a| i[a] as f64 * g.spacing_mm()[a]))
        .collect()
}

fn assd_oracle(a: &VoxelVolume, b: &VoxelVolume) -> Option<f64> {
    let (pa, pb) = (surface(a), surface(b));
    if pa.is_empty() || pb.is_empty() {
        return None;
    }
    let nearest = |p: &[f64; 3], set: &[[f64; 3]]| {
        set.iter()
            .map(|q| (0..3).map(|k| (p[k] - q[k]) * (p[k] - q[k])).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    };
    // One running sum, first over a's surface then over b's.
    let total = pa.iter().map(|p| nearest(p, &pb)).chain(pb.iter().map(|p| nearest(p, &pa))).fold(0.0, |t, d| t + d);
    Some(total / (pa.len() + pb.len()) as f64)
}

pub fn metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc6);
    // Dyadic spacings keep every squared distance exact.
    let spacings = [[1.0, 1.0, 1.0], [0.5, 2.0, 1.0], [2.0, 4.0, 0.25]];
    let mut scored = 0;
    for case in 0..500 {
        let g = Geometry::new([8, 8, 8], spacings[case % 3], [0.0; 3]).unwrap();
        let (a, b) = (random_mask(&mut rng, g), random_mask(&mut rng, g));
        let d = dice(&a, &b).map_err(|e| e.to_string())?;
        ensure!(d == dice_oracle(&a, &b), "Dice {d} differs from the oracle in case {case}");
        let s = assd(&a, &b).map_err(|e| e.to_string())?;
        ensure!(s == assd_oracle(&a, &b), "ASSD {s:?} differs from the oracle in case {case}");
        scored += s.is_some() as usize;
    }
    for case in 0..200 {
        let g = random_geometry(&mut rng, 9);
        let m = random_mask(&mut rng, g);
        let b = mask_to_bbox(&m).unwrap();
        if b.empty {
            continue;
        }
        ensure!(doe(&b, &b) == Some([0.0; 6]), "DOE of a box with itself is not zero in case {case}");
        let t: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-20.0..20.0));
        let d = doe(&b.translated(t), &b).unwrap();
        let both = doe(&b.translated(t).translated(t), &b.translated(t)).unwrap();
        for f in 0..6 {
            ensure!((d[f] - t[f / 2].abs()).abs() < 1e-9, "DOE of a translated box is not the shift in case {case}");
            ensure!((both[f] - d[f]).abs() < 1e-9, "DOE changes under a common translation in case {case}");
        }
    }
    Ok(format!("{scored} pairs had both surfaces"))
}

pub fn projections() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc9);
    let mut boxes = 0;
    for case in 0..500 {
        let g = random_geometry(&mut rng, 10);
        let channels = ["liver", "spleen"].map(|n| (n.to_string(), random_mask(&mut rng, g)));
        let labels = LabelVolume::new(g, channels.to_vec()).unwrap();
        let combined = combine_projections(
            &project_labels(&labels, Plane::Coronal),
            &project_labels(&labels, Plane::Sagittal),
            &project_labels(&labels, Plane::Axial),
        );
        ensure!(combined.len() == 2, "expected two boxes in case {case}");
        for ((name, m), (got_name, got)) in labels.channels().iter().zip(&combined) {
            ensure!(name == got_name, "label order changed in case {case}");
            ensure!(*got == mask_to_bbox(m).unwrap(), "{name} box differs in case {case}");
            boxes += !got.empty as usize;
        }
    }
    Ok(format!("{boxes} non-empty boxes exact"))
}
