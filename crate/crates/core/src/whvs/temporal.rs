use serde::{Deserialize, Serialize};

use super::{DisparityMap, WhvsError};

/// Consistency-masked blending with the neighbouring frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalFusionConfig {
    /// Mask decay, pixels.
    pub sigma_d: f64,
    pub tau_prev: f64,
    pub tau_next: f64,
}

impl Default for TemporalFusionConfig {
    fn default() -> Self {
        Self { sigma_d: 1.0, tau_prev: 0.25, tau_next: 0.25 }
    }
}

impl TemporalFusionConfig {
    pub fn validate(&self) -> Result<(), WhvsError> {
        if !(self.sigma_d > 0.0) {
            return Err(WhvsError::InvalidParameter(format!("sigma_d must be positive, got {}", self.sigma_d)));
        }
        for (name, tau) in [("tau_prev", self.tau_prev), ("tau_next", self.tau_next)] {
            if !(0.0..=1.0).contains(&tau) {
                return Err(WhvsError::InvalidParameter(format!("{name} must lie in [0, 1], got {tau}")));
            }
        }
        Ok(())
    }
}

/// `d = d_t + tau_prev m (d_prev - d_t) + tau_next m (d_next - d_t)` with
/// `m = exp(-|d_a - d_t| / sigma_d)`. A neighbour that is invalid at a pixel
/// contributes nothing there; the output is valid where `d_t` is.
pub fn temporal_fuse(
    prev: &DisparityMap,
    cur: &DisparityMap,
    next: &DisparityMap,
    cfg: &TemporalFusionConfig,
) -> Result<DisparityMap, WhvsError> {
    cfg.validate()?;
    if !prev.same_shape(cur) || !next.same_shape(cur) {
        return Err(WhvsError::DimMismatch("temporal fusion needs three maps of the same size".into()));
    }
    let residual = |other: &DisparityMap, idx: usize, tau: f64| {
        if !other.is_valid(idx) {
            return 0.0;
        }
        let diff = other.values[idx] - cur.values[idx];
        tau * (-diff.abs() / cfg.sigma_d).exp() * diff
    };
    let values = (0..cur.values.len())
        .map(|idx| cur.values[idx] + residual(prev, idx, cfg.tau_prev) + residual(next, idx, cfg.tau_next))
        .collect();
    Ok(DisparityMap { h: cur.h, w: cur.w, values, mask: cur.mask.clone() })
}
