//! Geometry-aware volume containers and the non-learning half of the
//! depth-to-anatomy pipeline: synthetic phantoms, depth-sensor simulation,
//! label cleanup and localization/segmentation metrics.
//!
//! Array axes are always `(LR, AP, SI)`. Index 0 on the AP axis is the
//! anterior side, where the simulated camera sits. Linear storage is
//! LR-fastest: `lr + n_lr * (ap + n_ap * si)`.

pub mod depthsynth;
mod error;
mod geometry;
pub mod io;
pub mod labels;
pub mod manifest;
pub mod metrics;
pub mod morphology;
pub mod phantom;
mod registry;
mod volume;

pub use error::{Error, Result};
pub use geometry::{voxel_to_world, Geometry};
pub use registry::{LabelRegistry, LABEL_NAMES};
pub use volume::{BoundingBox3D, DepthImage, Face, LabelVolume, VolumeKind, VoxelVolume};
