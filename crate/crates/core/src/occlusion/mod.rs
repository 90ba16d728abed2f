//! Occlusion protocol on synthetic stereo pairs: binary masks applied to both
//! views, a classical block-matching baseline, a nadir-looking sea scene with
//! exact ground truth, and the error sweep over occlusion ratio.

mod baseline;
mod mask;
mod scene;
mod sweep;

pub use baseline::BlockMatcher;
pub use mask::{make_mask, OcclusionKind, OcclusionMask, OcclusionSpec};
pub use scene::NadirScene;
pub use sweep::{footprint_grid, occluded_sweep, reconstruct_eta, SweepOptions, SweepResult};

use thiserror::Error;

use crate::field::FieldError;
use crate::geometry::GeometryError;
use crate::synth::SynthError;
use crate::whvs::WhvsError;

#[derive(Debug, Error)]
pub enum OcclusionError {
    #[error("invalid occlusion spec: {0}")]
    InvalidSpec(String),
    #[error("reference reconstruction has no valid cell")]
    EmptyReference,
    #[error(transparent)]
    Whvs(#[from] WhvsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Field(#[from] FieldError),
}
