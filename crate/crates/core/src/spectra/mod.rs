//! Wave statistics and error metrics: Welch spectra, significant height and
//! peak frequency, directional spectra, elevation and disparity errors.

mod directional;
mod metrics;
mod psd;
mod stats;

pub use directional::{directional_spectrum, DirectionalSpectrum, THETA_BINS};
pub use metrics::{disparity_errors, field_errors, DisparityErrors, FieldErrors};
pub use psd::{compute_psd, field_psd, Psd};
pub use stats::{wave_stats, WaveStats, DEFAULT_TAIL_RANGE};

use thiserror::Error;

use crate::field::FieldError;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("record too short: need {required}, got {actual}")]
    TooShort { required: usize, actual: usize },
    #[error("spectrum has no peak")]
    NoPeak,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Periodic Hann window of length `n`.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).collect()
}
