use super::{CorrelationVolume, DisparityMap, WhvsError};

/// Softmax weights over the finite entries of `logits`; `None` when all are excluded.
pub(crate) fn softmax(logits: &[f64]) -> Option<Vec<f64>> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut w: Vec<f64> = logits.iter().map(|&c| (c - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    Some(w)
}

/// Expected matching column of one left pixel, turned into `j - E[k]`.
pub(crate) fn soft_match(candidates: &[f64], j: usize) -> Option<f64> {
    let w = softmax(&candidates[..=j])?;
    let coor: f64 = w.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    Some(j as f64 - coor)
}

/// Softmax over each pixel's candidates, then `d = j - sum_k W_k k`.
pub fn soft_disparity(volume: &CorrelationVolume) -> Result<DisparityMap, WhvsError> {
    let (h, w) = (volume.h, volume.w);
    let mut values = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            values[i * w + j] =
                soft_match(volume.candidates(i, j), j).ok_or(WhvsError::AllMasked { row: i, col: j })?;
        }
    }
    DisparityMap::new(h, w, values)
}

/// Vector-Jacobian product of [`soft_disparity`]: `dd/dC_k = -W_k (k - E[k])`.
pub fn soft_disparity_backward(volume: &CorrelationVolume, grad: &DisparityMap) -> Result<CorrelationVolume, WhvsError> {
    let (h, w) = (volume.h, volume.w);
    if grad.h != h || grad.w != w {
        return Err(WhvsError::DimMismatch(format!("gradient map {}x{} for volume {h}x{w}", grad.h, grad.w)));
    }
    let mut out = vec![0.0; h * w * w];
    for i in 0..h {
        for j in 0..w {
            let weights = softmax(&volume.candidates(i, j)[..=j]).ok_or(WhvsError::AllMasked { row: i, col: j })?;
            let coor: f64 = weights.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            let g = grad.at(i, j);
            let o = (i * w + j) * w;
            for (k, p) in weights.iter().enumerate() {
                out[o + k] = -g * p * (k as f64 - coor);
            }
        }
    }
    Ok(CorrelationVolume { h, w, values: out })
}
