//! Reference methods that localize organs without the volumetric network:
//! a patient-agnostic mean model and a 2.5D approach that predicts organ
//! projections on three planes and intersects their extents into boxes.

pub mod experiment;
mod mean;
mod projection;

pub use mean::MeanModel;
pub use projection::{
    combine_projections, predict_projection, project_labels, train_plane_model, PlaneProjection,
};
