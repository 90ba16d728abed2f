//! Disparity estimation operators: FiLM modulation, row-wise correlation,
//! soft matching, global self-attention refinement, temporal fusion and the
//! position-weighted L1 loss. Every differentiable operator has a
//! vector-Jacobian product next to its forward pass.

mod attention;
mod correlation;
mod features;
mod film;
pub mod gradcheck;
mod loss;
mod pipeline;
mod soft;
mod temporal;

pub use attention::{attention_refine, attention_refine_backward};
pub use correlation::{correlate_1d, correlate_1d_backward, CorrelationVolume};
pub use features::{downsample, match_features, reference_features, upsample_disparity, FeatureConfig};
pub use film::{film_modulate, modulate, modulate_backward, FilmMlp, FilmParams, FILM_INPUT};
pub use loss::{position_weight, weighted_l1_loss, LossWeights};
pub use pipeline::{PipelineConfig, WhvsPipeline};
pub use soft::{soft_disparity, soft_disparity_backward};
pub use temporal::{temporal_fuse, TemporalFusionConfig};

use thiserror::Error;

use crate::field::{FieldError, Grid2D, ScalarField, Tensor3};

#[derive(Debug, Error)]
pub enum WhvsError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("no unmasked candidate for pixel ({row}, {col})")]
    AllMasked { row: usize, col: usize },
    #[error("loss mask selects no pixel")]
    EmptyMask,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Per-pixel feature vectors `[h][w][d]` at downsampling exponent `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub tensor: Tensor3,
    pub scale: u32,
    /// `false` marks a location whose feature must not take part in matching.
    pub mask: Option<Vec<bool>>,
}

impl FeatureMap {
    pub fn new(tensor: Tensor3, scale: u32) -> Result<Self, WhvsError> {
        let (h, w, d) = tensor.dims();
        if h == 0 || w == 0 || d == 0 {
            return Err(WhvsError::DimMismatch(format!("empty feature map {h}x{w}x{d}")));
        }
        if tensor.values.iter().any(|v| !v.is_finite()) {
            return Err(WhvsError::InvalidParameter("feature map has non-finite entries".into()));
        }
        Ok(Self { tensor, scale, mask: None })
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self, WhvsError> {
        let n = self.tensor.h * self.tensor.w;
        if mask.len() != n {
            return Err(WhvsError::DimMismatch(format!("mask has {} entries for {n} locations", mask.len())));
        }
        self.mask = if mask.iter().all(|&m| m) { None } else { Some(mask) };
        Ok(self)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.tensor.dims()
    }

    #[inline]
    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i * self.tensor.w + j])
    }
}

/// Disparity in pixels of its own scale, row-major `[h][w]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl DisparityMap {
    pub fn new(h: usize, w: usize, values: Vec<f64>) -> Result<Self, WhvsError> {
        if values.len() != h * w {
            return Err(WhvsError::DimMismatch(format!("{} values for a {h}x{w} map", values.len())));
        }
        Ok(Self { h, w, values, mask: None })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, values: vec![0.0; h * w], mask: None }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self, WhvsError> {
        if mask.len() != self.values.len() {
            return Err(WhvsError::DimMismatch(format!("mask has {} entries for {} pixels", mask.len(), self.values.len())));
        }
        self.mask = if mask.iter().all(|&m| m) { None } else { Some(mask) };
        Ok(self)
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.w + j]
    }

    pub fn same_shape(&self, other: &DisparityMap) -> bool {
        self.h == other.h && self.w == other.w
    }

    /// As a field on the pixel grid (`x` = column, `y` = row).
    pub fn to_field(&self) -> Result<ScalarField, WhvsError> {
        let grid = Grid2D::pixels(self.w, self.h)?;
        Ok(ScalarField { grid, values: self.values.clone(), mask: self.mask.clone() })
    }

    pub fn from_field(field: &ScalarField) -> Self {
        Self { h: field.grid.ny, w: field.grid.nx, values: field.values.clone(), mask: field.mask.clone() }
    }
}

/// Anything that turns a rectified image pair into a left-view disparity map.
pub trait DisparityEstimator {
    fn estimate(&self, left: &ScalarField, right: &ScalarField) -> Result<DisparityMap, WhvsError>;

    /// Per-frame estimates; implementations may share information across time.
    fn estimate_sequence(&self, pairs: &[(ScalarField, ScalarField)]) -> Result<Vec<DisparityMap>, WhvsError> {
        pairs.iter().map(|(l, r)| self.estimate(l, r)).collect()
    }
}

pub(crate) fn check_same_dims(a: (usize, usize, usize), b: (usize, usize, usize), what: &str) -> Result<(), WhvsError> {
    if a != b {
        return Err(WhvsError::DimMismatch(format!("{what}: {a:?} vs {b:?}")));
    }
    Ok(())
}
