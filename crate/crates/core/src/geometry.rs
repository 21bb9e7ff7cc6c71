use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical sampling of a voxel grid along `(LR, AP, SI)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    shape: [usize; 3],
    spacing_mm: [f64; 3],
    origin_mm: [f64; 3],
}

impl Geometry {
    pub fn new(shape: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3]) -> Result<Self> {
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::Invariant(format!(
                "shape entries must be >= 1, got {shape:?}"
            )));
        }
        if spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Invariant(format!(
                "spacing entries must be finite and > 0, got {spacing_mm:?}"
            )));
        }
        if origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::Invariant(format!(
                "origin must be finite, got {origin_mm:?}"
            )));
        }
        Ok(Self {
            shape,
            spacing_mm,
            origin_mm,
        })
    }

    /// Unit spacing, zero origin.
    pub fn unit(shape: [usize; 3]) -> Result<Self> {
        Self::new(shape, [1.0; 3], [0.0; 3])
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing_mm(&self) -> [f64; 3] {
        self.spacing_mm
    }

    pub fn origin_mm(&self) -> [f64; 3] {
        self.origin_mm
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear LR-fastest offset of `(lr, ap, si)`.
    #[inline]
    pub fn offset(&self, lr: usize, ap: usize, si: usize) -> usize {
        lr + self.shape[0] * (ap + self.shape[1] * si)
    }

    /// Inverse of [`Geometry::offset`].
    #[inline]
    pub fn index_of(&self, offset: usize) -> [usize; 3] {
        let lr = offset % self.shape[0];
        let rest = offset / self.shape[0];
        [lr, rest % self.shape[1], rest / self.shape[1]]
    }

    /// World coordinate along one axis; no bounds check.
    #[inline]
    pub fn axis_to_world(&self, axis: usize, index: f64) -> f64 {
        self.origin_mm[axis] + index * self.spacing_mm[axis]
    }

    pub fn contains(&self, index: [i64; 3]) -> bool {
        index
            .iter()
            .zip(self.shape.iter())
            .all(|(&i, &n)| i >= 0 && (i as usize) < n)
    }
}

/// Millimetre position of a voxel centre: `origin + index * spacing`.
pub fn voxel_to_world(geometry: &Geometry, index: [i64; 3]) -> Result<[f64; 3]> {
    if !geometry.contains(index) {
        return Err(Error::OutOfBounds {
            index,
            shape: geometry.shape,
        });
    }
    Ok(std::array::from_fn(|a| {
        geometry.axis_to_world(a, index[a] as f64)
    }))
}
