use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::ScalarField;
use crate::whvs::{DisparityEstimator, DisparityMap, WhvsError};

/// Classical row-correlation matcher: zero-normalized cross-correlation over a
/// square window, winner-take-all over integer disparities, parabolic
/// sub-pixel refinement. Windows touching an invalid pixel are not matched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockMatcher {
    /// Window half-width; 3 gives the usual 7x7 window.
    pub radius: usize,
    pub max_disparity: usize,
    /// Best ZNCC below this leaves the pixel invalid.
    pub min_score: f64,
}

impl Default for BlockMatcher {
    fn default() -> Self {
        Self { radius: 3, max_disparity: 32, min_score: 0.5 }
    }
}

/// Window mean and standard deviation, `None` where the window leaves the
/// image, touches an invalid pixel or is flat.
fn window_stats(img: &ScalarField, r: usize) -> Vec<Option<(f64, f64)>> {
    let (w, h) = (img.grid.nx, img.grid.ny);
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    (0..w * h)
        .map(|idx| {
            let (x, y) = (idx % w, idx / w);
            if x < r || y < r || x + r >= w || y + r >= h {
                return None;
            }
            let (mut s, mut s2) = (0.0, 0.0);
            for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    let k = yy * w + xx;
                    if !img.is_valid(k) {
                        return None;
                    }
                    s += img.values[k];
                    s2 += img.values[k] * img.values[k];
                }
            }
            let mean = s / n;
            let var = s2 / n - mean * mean;
            (var > 1e-12).then(|| (mean, var.sqrt()))
        })
        .collect()
}

impl BlockMatcher {
    fn validate(&self) -> Result<(), WhvsError> {
        if self.max_disparity == 0 || !(-1.0..=1.0).contains(&self.min_score) {
            return Err(WhvsError::InvalidParameter(format!(
                "block matcher needs max_disparity >= 1 and min_score in [-1, 1], got {} and {}",
                self.max_disparity, self.min_score
            )));
        }
        Ok(())
    }
}

impl DisparityEstimator for BlockMatcher {
    fn estimate(&self, left: &ScalarField, right: &ScalarField) -> Result<DisparityMap, WhvsError> {
        self.validate()?;
        if left.grid.nx != right.grid.nx || left.grid.ny != right.grid.ny {
            return Err(WhvsError::DimMismatch(format!(
                "left {}x{} vs right {}x{}",
                left.grid.nx, left.grid.ny, right.grid.nx, right.grid.ny
            )));
        }
        let (w, h) = (left.grid.nx, left.grid.ny);
        let r = self.radius;
        let n = ((2 * r + 1) * (2 * r + 1)) as f64;
        let ls = window_stats(left, r);
        let rs = window_stats(right, r);
        let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..h)
            .into_par_iter()
            .map(|y| {
                let mut values = vec![0.0; w];
                let mut valid = vec![false; w];
                let mut scores = vec![f64::NEG_INFINITY; self.max_disparity + 1];
                for x in 0..w {
                    let Some((ml, sl)) = ls[y * w + x] else { continue };
                    scores.fill(f64::NEG_INFINITY);
                    for (d, score) in scores.iter_mut().enumerate().take(x + 1) {
                        let Some((mr, sr)) = rs[y * w + x - d] else { continue };
                        let mut cross = 0.0;
                        for yy in y - r..=y + r {
                            let lrow = &left.values[yy * w + x - r..=yy * w + x + r];
                            let rrow = &right.values[yy * w + x - d - r..=yy * w + x - d + r];
                            cross += lrow.iter().zip(rrow).map(|(a, b)| a * b).sum::<f64>();
                        }
                        *score = (cross - n * ml * mr) / (n * sl * sr);
                    }
                    let (best, &peak) = scores
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                        .expect("at least one candidate");
                    if !(peak >= self.min_score) {
                        continue;
                    }
                    let mut d = best as f64;
                    if best > 0 && best < self.max_disparity {
                        let (cm, cp) = (scores[best - 1], scores[best + 1]);
                        let curv = cm - 2.0 * peak + cp;
                        if cm.is_finite() && cp.is_finite() && curv < 0.0 {
                            d += (0.5 * (cm - cp) / curv).clamp(-0.5, 0.5);
                        }
                    }
                    values[x] = d;
                    valid[x] = true;
                }
                (values, valid)
            })
            .collect();
        let (values, mask): (Vec<Vec<f64>>, Vec<Vec<bool>>) = rows.into_iter().unzip();
        DisparityMap::new(h, w, values.concat())?.with_mask(mask.concat())
    }
}
