//! Ground-truth label construction: priority aggregation across ranked
//! sources and per-structure cleanup.

use std::collections::VecDeque;

use crate::{Error, LabelVolume, Result, VoxelVolume};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Faces6,
    Full26,
}

impl Connectivity {
    fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Faces6 => manhattan == 1,
                        Connectivity::Full26 => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Connected components of the `true` voxels. Returns per-voxel component
/// ids (0 = not in `mask`, components numbered from 1 in scan order) and the
/// size of each component (`sizes[id - 1]`).
pub fn label_components(
    mask: &[bool],
    shape: [usize; 3],
    connectivity: Connectivity,
) -> (Vec<u32>, Vec<usize>) {
    let [nx, ny, nz] = shape;
    let offsets = connectivity.offsets();
    let mut ids = vec![0u32; mask.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || ids[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        ids[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(o) = queue.pop_front() {
            size += 1;
            let (x, y, z) = (o % nx, (o / nx) % ny, o / (nx * ny));
            for &[dx, dy, dz] in &offsets {
                let (xi, yi, zi) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                if xi < 0 || yi < 0 || zi < 0 {
                    continue;
                }
                let (xi, yi, zi) = (xi as usize, yi as usize, zi as usize);
                if xi >= nx || yi >= ny || zi >= nz {
                    continue;
                }
                let n = xi + nx * (yi + ny * zi);
                if mask[n] && ids[n] == 0 {
                    ids[n] = id;
                    queue.push_back(n);
                }
            }
        }
        sizes.push(size);
    }
    (ids, sizes)
}

/// For each label name, the channel of the first (highest-priority) source
/// in which it is non-empty. Output order follows first appearance across
/// the sources; names empty everywhere are dropped.
pub fn priority_merge(sources: &[LabelVolume]) -> Result<LabelVolume> {
    let first = sources
        .first()
        .ok_or_else(|| Error::Param("priority_merge needs at least one source".into()))?;
    let geometry = *first.geometry();
    if let Some(i) = sources.iter().position(|s| s.geometry() != &geometry) {
        return Err(Error::GeometryMismatch(format!(
            "source {i} does not share the geometry of source 0"
        )));
    }
    let mut names: Vec<&str> = Vec::new();
    for source in sources {
        for name in source.names() {
            if !names.contains(&name) {
                names.push(name);
            }
        }
    }
    let channels = names
        .into_iter()
        .filter_map(|name| {
            sources
                .iter()
                .filter_map(|s| s.get(name))
                .find(|m| m.count_nonzero() > 0)
                .map(|m| (name.to_string(), m.clone()))
        })
        .collect();
    LabelVolume::new(geometry, channels)
}

/// Sets to foreground every background region (6-connected) that does not
/// reach the volume border.
pub fn fill_holes(mask: &VoxelVolume) -> Result<VoxelVolume> {
    mask.require_mask("fill_holes")?;
    let shape = mask.shape();
    let [nx, ny, nz] = shape;
    let fg = mask.to_bools();
    let background: Vec<bool> = fg.iter().map(|&b| !b).collect();
    let mut outside = vec![false; fg.len()];
    let mut queue = VecDeque::new();
    for o in 0..fg.len() {
        let (x, y, z) = (o % nx, (o / nx) % ny, o / (nx * ny));
        let border = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
        if border && background[o] {
            outside[o] = true;
            queue.push_back(o);
        }
    }
    let offsets = Connectivity::Faces6.offsets();
    while let Some(o) = queue.pop_front() {
        let (x, y, z) = (o % nx, (o / nx) % ny, o / (nx * ny));
        for &[dx, dy, dz] in &offsets {
            let (xi, yi, zi) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
            if xi < 0 || yi < 0 || zi < 0 || xi as usize >= nx || yi as usize >= ny || zi as usize >= nz {
                continue;
            }
            let n = xi as usize + nx * (yi as usize + ny * zi as usize);
            if background[n] && !outside[n] {
                outside[n] = true;
                queue.push_back(n);
            }
        }
    }
    let filled: Vec<bool> = outside.iter().map(|&o| !o).collect();
    VoxelVolume::from_mask(*mask.geometry(), &filled)
}

/// Drops 26-connected components smaller than `min_fraction` times the
/// largest one. The largest component always survives.
pub fn keep_main_components(mask: &VoxelVolume, min_fraction: f64) -> Result<VoxelVolume> {
    mask.require_mask("keep_main_components")?;
    if !(0.0..=1.0).contains(&min_fraction) {
        return Err(Error::Param(format!("min_fraction must lie in [0, 1], got {min_fraction}")));
    }
    let (ids, sizes) = label_components(&mask.to_bools(), mask.shape(), Connectivity::Full26);
    let Some(&largest) = sizes.iter().max() else {
        return Ok(mask.clone());
    };
    let threshold = min_fraction * largest as f64;
    let keep: Vec<bool> = sizes.iter().map(|&s| s as f64 >= threshold).collect();
    let bits: Vec<bool> = ids.iter().map(|&id| id != 0 && keep[id as usize - 1]).collect();
    VoxelVolume::from_mask(*mask.geometry(), &bits)
}
