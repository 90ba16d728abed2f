//! Analytic linear deep-water wave fields and synthetic stereo pairs used as
//! ground truth by the rest of the crate.

mod sea;
mod stereo;
mod waves;

pub use sea::{jonswap_shape, preset, preset_ids, ConditionPreset, SeaStateSpec};
pub use stereo::{band_limited_texture, cubic_sample_row, synth_stereo_pair, StereoPair};
pub use waves::{
    analytic_subsurface_velocity, analytic_surface_velocity, check_components, synth_elevation, synth_point_series,
    WaveComponent, GRAVITY,
};

use thiserror::Error;

use crate::field::FieldError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("dispersion violated: omega {omega} rad/s does not match k {k} rad/m")]
    DispersionViolation { omega: f64, k: f64 },
    #[error("invalid wave component: {0}")]
    InvalidComponent(String),
    #[error("subsurface point above the mean surface (Z = {0})")]
    PositiveDepth(f64),
    #[error("negative disparity {value} at pixel ({u}, {v})")]
    NegativeDisparity { u: usize, v: usize, value: f64 },
    #[error("invalid sea state: {0}")]
    InvalidSeaState(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}
