//! Subsurface velocity reconstruction from surface velocities with a
//! truncated Fourier potential that satisfies Laplace's equation exactly.

mod basis;
mod eval;
pub mod io;
pub mod problem;
mod solve;
mod streamlines;

pub use basis::PotentialBasis;
pub use eval::{evaluate_laplacian, evaluate_on_grid, evaluate_potential, evaluate_velocity, temporal_lowpass};
pub use problem::FitProblem;
pub use solve::{default_lambda, fit_coefficients, fit_series, solve_problem, FitOptions, FrameFit, SolverKind};
pub use streamlines::{streamlines, Streamline, StreamlineOptions, StreamlineStop};

use num_complex::Complex64;
use thiserror::Error;

use crate::field::FieldError;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no valid surface samples to fit")]
    NoData,
    #[error("normal matrix is singular; undetermined modes (n, m): {modes:?}")]
    SingularSystem { modes: Vec<(i64, i64)> },
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("frame {index} out of range for {len} frames")]
    FrameOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Per-frame coefficients of the independent half spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialCoefficients {
    pub basis: PotentialBasis,
    pub dt: f64,
    pub t0: f64,
    /// Penalty weight used for each frame.
    pub lambda: Vec<f64>,
    pub frames: Vec<Vec<Complex64>>,
}

impl PotentialCoefficients {
    pub fn single(basis: PotentialBasis, coefficients: Vec<Complex64>, lambda: f64) -> Self {
        Self { basis, dt: 1.0, t0: 0.0, lambda: vec![lambda], frames: vec![coefficients] }
    }

    pub fn frame(&self, index: usize) -> Result<&[Complex64], PotentialError> {
        self.frames
            .get(index)
            .map(Vec::as_slice)
            .ok_or(PotentialError::FrameOutOfRange { index, len: self.frames.len() })
    }

    /// Full Hermitian `[2N+1][2M+1]` array of one frame.
    pub fn full(&self, index: usize) -> Result<Vec<Complex64>, PotentialError> {
        Ok(self.basis.to_full(self.frame(index)?))
    }
}
