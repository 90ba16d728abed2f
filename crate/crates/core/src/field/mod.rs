//! Uniform-grid field containers, finite-difference stencils, spectral time
//! integration and the WFS1 on-disk format.

mod grid;
pub mod integrate;
pub mod io;
pub mod stencil;

pub use grid::{Grid2D, ScalarField, ScalarFieldSeries, Tensor3, VectorField3};
pub use integrate::{fourier_time_integral, SpectralIntegrator};
pub use io::{read_field, read_frames, write_field, write_frames, WfsHeader};
pub use stencil::{backward_time_derivative, central_gradient, time_derivative_all};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("dt must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("need at least {required} frames, got {actual}")]
    TooFewFrames { required: usize, actual: usize },
    #[error("frame index {index} below minimum {minimum} for the backward stencil")]
    IndexTooSmall { index: usize, minimum: usize },
    #[error("frame index {index} out of range for {len} frames")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
