//! Rectified stereo triangulation, mean-water-plane estimation and gridding
//! of the reconstructed surface.

mod camera;
pub mod io;
mod plane;
mod resample;

pub use camera::{plane_disparity, triangulate, CameraIntrinsics, PointCloud, ReconstructionRegion, StereoRig, D_MIN};
pub use plane::{fit_plane, to_camera, to_global, PlaneFitOptions, PlanePose};
pub use resample::project_eta;

use thiserror::Error;

use crate::field::FieldError;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least 3 valid points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate geometry: best plane explains {inlier_fraction:.3} of the points")]
    DegenerateGeometry { inlier_fraction: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}
