use serde::{Deserialize, Serialize};

use super::{DisparityMap, WhvsError};

/// Row-position weighting of the L1 disparity loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Weight floor reached at the bottom row.
    pub alpha: f64,
    pub beta_exp: f64,
    /// Image height `V`, pixels.
    pub image_height: f64,
}

impl LossWeights {
    pub fn new(image_height: f64) -> Self {
        Self { alpha: 0.3, beta_exp: 2.0, image_height }
    }

    pub fn validate(&self) -> Result<(), WhvsError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(WhvsError::InvalidParameter(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.beta_exp >= 0.0) {
            return Err(WhvsError::InvalidParameter(format!("beta_exp must be >= 0, got {}", self.beta_exp)));
        }
        if !(self.image_height > 0.0) {
            return Err(WhvsError::InvalidParameter(format!("image height must be positive, got {}", self.image_height)));
        }
        Ok(())
    }
}

/// `alpha + (1 - alpha) (1 - v/V)^beta` for row `v`.
pub fn position_weight(v: f64, w: &LossWeights) -> f64 {
    w.alpha + (1.0 - w.alpha) * (1.0 - v / w.image_height).max(0.0).powf(w.beta_exp)
}

/// Mean weighted absolute error over pixels valid in both maps, and its
/// gradient with respect to `pred` (zero at ties and outside the mask).
pub fn weighted_l1_loss(pred: &DisparityMap, gt: &DisparityMap, w: &LossWeights) -> Result<(f64, DisparityMap), WhvsError> {
    w.validate()?;
    if !pred.same_shape(gt) {
        return Err(WhvsError::DimMismatch(format!("prediction {}x{} vs truth {}x{}", pred.h, pred.w, gt.h, gt.w)));
    }
    let n = (0..pred.values.len()).filter(|&k| pred.is_valid(k) && gt.is_valid(k)).count();
    if n == 0 {
        return Err(WhvsError::EmptyMask);
    }
    let mut loss = 0.0;
    let mut grad = DisparityMap::zeros(pred.h, pred.w);
    for i in 0..pred.h {
        let weight = position_weight(i as f64, w) / n as f64;
        for j in 0..pred.w {
            let k = i * pred.w + j;
            if !(pred.is_valid(k) && gt.is_valid(k)) {
                continue;
            }
            let diff = pred.values[k] - gt.values[k];
            loss += weight * diff.abs();
            grad.values[k] = if diff == 0.0 { 0.0 } else { weight * diff.signum() };
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_profile() {
        let w = LossWeights::new(480.0);
        assert!((position_weight(0.0, &w) - 1.0).abs() < 1e-15);
        assert!((position_weight(480.0, &w) - 0.3).abs() < 1e-15);
        assert!((position_weight(240.0, &w) - 0.475).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let d = DisparityMap::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let (loss, grad) = weighted_l1_loss(&d, &d, &LossWeights::new(2.0)).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.values.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn empty_mask_is_an_error() {
        let d = DisparityMap::zeros(1, 2).with_mask(vec![false, false]).unwrap();
        assert!(matches!(
            weighted_l1_loss(&d, &DisparityMap::zeros(1, 2), &LossWeights::new(1.0)),
            Err(WhvsError::EmptyMask)
        ));
    }
}
