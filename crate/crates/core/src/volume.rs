use serde::{Deserialize, Serialize};

use crate::{Error, Geometry, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeKind {
    Intensity,
    BinaryMask,
}

/// A scalar grid with physical geometry. Masks hold exactly `0.0` or `1.0`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelVolume {
    geometry: Geometry,
    data: Vec<f32>,
    kind: VolumeKind,
}

impl VoxelVolume {
    pub fn new(geometry: Geometry, data: Vec<f32>, kind: VolumeKind) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::Invariant(format!(
                "data has {} elements, shape {:?} needs {}",
                data.len(),
                geometry.shape(),
                geometry.len()
            )));
        }
        if kind == VolumeKind::BinaryMask {
            if let Some((i, v)) = data
                .iter()
                .enumerate()
                .find(|(_, &v)| v != 0.0 && v != 1.0)
            {
                return Err(Error::Invariant(format!(
                    "binary mask element {i} is {v}, expected 0 or 1"
                )));
            }
        }
        Ok(Self {
            geometry,
            data,
            kind,
        })
    }

    pub fn zeros(geometry: Geometry, kind: VolumeKind) -> Self {
        Self {
            data: vec![0.0; geometry.len()],
            geometry,
            kind,
        }
    }

    /// Builds a mask from booleans; cannot violate the binary invariant.
    pub fn from_mask(geometry: Geometry, mask: &[bool]) -> Result<Self> {
        Self::new(
            geometry,
            mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            VolumeKind::BinaryMask,
        )
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn shape(&self) -> [usize; 3] {
        self.geometry.shape()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn is_mask(&self) -> bool {
        self.kind == VolumeKind::BinaryMask
    }

    pub fn get(&self, lr: usize, ap: usize, si: usize) -> f32 {
        self.data[self.geometry.offset(lr, ap, si)]
    }

    /// Foreground as booleans (`> 0.5`).
    pub fn to_bools(&self) -> Vec<bool> {
        self.data.iter().map(|&v| v > 0.5).collect()
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub(crate) fn require_mask(&self, op: &str) -> Result<()> {
        if self.is_mask() {
            Ok(())
        } else {
            Err(Error::Invariant(format!("{op} expects a binary mask")))
        }
    }
}

/// Per-structure binary masks sharing one geometry, in channel order.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    geometry: Geometry,
    channels: Vec<(String, VoxelVolume)>,
}

impl LabelVolume {
    pub fn new(geometry: Geometry, channels: Vec<(String, VoxelVolume)>) -> Result<Self> {
        for (i, (name, mask)) in channels.iter().enumerate() {
            if !mask.is_mask() {
                return Err(Error::Invariant(format!("channel `{name}` is not a mask")));
            }
            if mask.geometry() != &geometry {
                return Err(Error::GeometryMismatch(format!(
                    "channel `{name}` geometry differs from the label volume"
                )));
            }
            if channels[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::Invariant(format!("duplicate label `{name}`")));
            }
        }
        Ok(Self { geometry, channels })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn channels(&self) -> &[(String, VoxelVolume)] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<(String, VoxelVolume)> {
        self.channels
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&VoxelVolume> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Applies `f` to every channel, keeping names and order.
    pub fn map_channels(
        &self,
        mut f: impl FnMut(&VoxelVolume) -> Result<VoxelVolume>,
    ) -> Result<LabelVolume> {
        let channels = self
            .channels
            .iter()
            .map(|(n, m)| Ok((n.clone(), f(m)?)))
            .collect::<Result<Vec<_>>>()?;
        LabelVolume::new(self.geometry, channels)
    }
}

/// Coronal depth map indexed `(lr, si)` with LR fastest. `0` means no
/// surface; larger values are closer to the camera.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    shape: [usize; 2],
    pixel_spacing_mm: [f64; 2],
    data: Vec<f32>,
}

impl DepthImage {
    pub fn new(shape: [usize; 2], pixel_spacing_mm: [f64; 2], data: Vec<f32>) -> Result<Self> {
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::Invariant(format!("depth shape {shape:?} has a zero")));
        }
        if pixel_spacing_mm.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Invariant(format!(
                "pixel spacing must be > 0, got {pixel_spacing_mm:?}"
            )));
        }
        if data.len() != shape[0] * shape[1] {
            return Err(Error::Invariant(format!(
                "depth data has {} elements, expected {}",
                data.len(),
                shape[0] * shape[1]
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invariant(format!("depth value {v} outside [0, 1]")));
        }
        Ok(Self {
            shape,
            pixel_spacing_mm,
            data,
        })
    }

    pub fn zeros(shape: [usize; 2], pixel_spacing_mm: [f64; 2]) -> Result<Self> {
        Self::new(shape, pixel_spacing_mm, vec![0.0; shape[0] * shape[1]])
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn pixel_spacing_mm(&self) -> [f64; 2] {
        self.pixel_spacing_mm
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, lr: usize, si: usize) -> f32 {
        self.data[lr + self.shape[0] * si]
    }

    /// Same geometry, new values (validated).
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::new(self.shape, self.pixel_spacing_mm, data)
    }
}

/// One of the six faces of an axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Left,
    Right,
    Anterior,
    Posterior,
    Inferior,
    Superior,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::Left,
        Face::Right,
        Face::Anterior,
        Face::Posterior,
        Face::Inferior,
        Face::Superior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Face::Left => "left",
            Face::Right => "right",
            Face::Anterior => "anterior",
            Face::Posterior => "posterior",
            Face::Inferior => "inferior",
            Face::Superior => "superior",
        }
    }

    /// Array axis the face is perpendicular to.
    pub fn axis(self) -> usize {
        match self {
            Face::Left | Face::Right => 0,
            Face::Anterior | Face::Posterior => 1,
            Face::Inferior | Face::Superior => 2,
        }
    }
}

/// Axis-aligned box in world millimetres. The low face of each axis comes
/// first: left, anterior and inferior are the minimum coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox3D {
    pub left: f64,
    pub right: f64,
    pub anterior: f64,
    pub posterior: f64,
    pub inferior: f64,
    pub superior: f64,
    pub empty: bool,
}

impl BoundingBox3D {
    pub fn empty() -> Self {
        Self {
            left: 0.0,
            right: 0.0,
            anterior: 0.0,
            posterior: 0.0,
            inferior: 0.0,
            superior: 0.0,
            empty: true,
        }
    }

    /// Box from per-axis `[min, max]` extents.
    pub fn from_extents(extents: [[f64; 2]; 3]) -> Result<Self> {
        if extents.iter().any(|[lo, hi]| lo > hi) {
            return Err(Error::Invariant(format!(
                "bounding box extents out of order: {extents:?}"
            )));
        }
        Ok(Self {
            left: extents[0][0],
            right: extents[0][1],
            anterior: extents[1][0],
            posterior: extents[1][1],
            inferior: extents[2][0],
            superior: extents[2][1],
            empty: false,
        })
    }

    pub fn extent(&self, axis: usize) -> [f64; 2] {
        match axis {
            0 => [self.left, self.right],
            1 => [self.anterior, self.posterior],
            2 => [self.inferior, self.superior],
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn face(&self, face: Face) -> f64 {
        match face {
            Face::Left => self.left,
            Face::Right => self.right,
            Face::Anterior => self.anterior,
            Face::Posterior => self.posterior,
            Face::Inferior => self.inferior,
            Face::Superior => self.superior,
        }
    }

    /// Faces in [`Face::ALL`] order.
    pub fn faces(&self) -> [f64; 6] {
        Face::ALL.map(|f| self.face(f))
    }

    pub fn translated(&self, offset: [f64; 3]) -> Self {
        if self.empty {
            return *self;
        }
        Self {
            left: self.left + offset[0],
            right: self.right + offset[0],
            anterior: self.anterior + offset[1],
            posterior: self.posterior + offset[1],
            inferior: self.inferior + offset[2],
            superior: self.superior + offset[2],
            empty: false,
        }
    }
}
