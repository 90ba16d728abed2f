use std::ops::Range;

use serde::Serialize;

use super::SpectraError;
use crate::field::{ScalarField, ScalarFieldSeries};
use crate::whvs::DisparityMap;

/// Elevation error statistics pooled over space and time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldErrors {
    pub r2: f64,
    /// m
    pub rmse: f64,
    /// RMSE over the standard deviation of the ground truth.
    pub nrmse: f64,
    /// Per-node time-mean absolute error, m.
    #[serde(skip)]
    pub mae_field: ScalarField,
    /// `(r, MAE)` for annuli `r <= |p - centre| < r + 1` in grid cells.
    pub radial_mae: Vec<(f64, f64)>,
    pub samples: usize,
}

/// R^2, RMSE and NRMSE over samples valid in both series, the time-mean
/// absolute error per node and its average over annuli around `centre`
/// (grid indices `(i, j)`).
pub fn field_errors(pred: &ScalarFieldSeries, gt: &ScalarFieldSeries, centre: (f64, f64)) -> Result<FieldErrors, SpectraError> {
    if pred.grid != gt.grid || pred.len() != gt.len() {
        return Err(SpectraError::DimMismatch(format!(
            "prediction {}x{}x{} vs truth {}x{}x{}",
            pred.grid.nx,
            pred.grid.ny,
            pred.len(),
            gt.grid.nx,
            gt.grid.ny,
            gt.len()
        )));
    }
    let g = gt.grid;
    let (mut n, mut sum_gt, mut sum_gt2, mut sse) = (0usize, 0.0, 0.0, 0.0);
    let mut abs_sum = vec![0.0; g.len()];
    let mut abs_count = vec![0usize; g.len()];
    for (p, t) in pred.frames.iter().zip(&gt.frames) {
        for k in 0..g.len() {
            if p.is_valid(k) && t.is_valid(k) {
                let e = p.values[k] - t.values[k];
                n += 1;
                sum_gt += t.values[k];
                sum_gt2 += t.values[k] * t.values[k];
                sse += e * e;
                abs_sum[k] += e.abs();
                abs_count[k] += 1;
            }
        }
    }
    if n == 0 {
        return Err(SpectraError::DimMismatch("no sample is valid in both series".into()));
    }
    let mean = sum_gt / n as f64;
    let sst = (sum_gt2 - n as f64 * mean * mean).max(0.0);
    let rmse = (sse / n as f64).sqrt();
    let std = (sst / n as f64).sqrt();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else if sse == 0.0 { 1.0 } else { f64::NEG_INFINITY };
    let nrmse = if std > 0.0 { rmse / std } else if rmse == 0.0 { 0.0 } else { f64::INFINITY };
    let mae: Vec<f64> = abs_sum.iter().zip(&abs_count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let mae_field = ScalarField { grid: g, values: mae, mask: None }.with_mask(abs_count.iter().map(|&c| c > 0).collect())?;

    let mut rings: Vec<(f64, usize)> = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            if !mae_field.is_valid(k) {
                continue;
            }
            let r = ((i as f64 - centre.0).powi(2) + (j as f64 - centre.1).powi(2)).sqrt().floor() as usize;
            if rings.len() <= r {
                rings.resize(r + 1, (0.0, 0));
            }
            rings[r].0 += mae_field.values[k];
            rings[r].1 += 1;
        }
    }
    let radial_mae = rings
        .iter()
        .enumerate()
        .filter(|(_, (_, c))| *c > 0)
        .map(|(r, (s, c))| (r as f64, s / *c as f64))
        .collect();
    Ok(FieldErrors { r2, rmse, nrmse, mae_field, radial_mae, samples: n })
}

/// Disparity error statistics pooled over a sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisparityErrors {
    /// Mean absolute disparity error, px.
    pub epe: f64,
    /// The same restricted to the far-field rows; `None` when no pixel there is valid.
    pub epe_far: Option<f64>,
    /// Percentage of pixels with error above 1 px.
    pub bad1px: f64,
    /// Percentage with error above both 3 px and 5% of the true disparity.
    pub d1: f64,
    /// Mean over consecutive frames of the RMS frame-to-frame change of the prediction, px.
    pub sigma_t: Option<f64>,
    /// The same statistic of the ground truth.
    pub sigma_t_gt: Option<f64>,
    pub samples: usize,
}

fn temporal_rms(seq: &[DisparityMap]) -> Option<f64> {
    if seq.len() < 2 {
        return None;
    }
    let per_pair: Vec<f64> = seq
        .windows(2)
        .filter_map(|w| {
            let (mut s, mut n) = (0.0, 0usize);
            for k in 0..w[0].values.len() {
                if w[0].is_valid(k) && w[1].is_valid(k) {
                    s += (w[1].values[k] - w[0].values[k]).powi(2);
                    n += 1;
                }
            }
            (n > 0).then(|| (s / n as f64).sqrt())
        })
        .collect();
    (!per_pair.is_empty()).then(|| per_pair.iter().sum::<f64>() / per_pair.len() as f64)
}

pub fn disparity_errors(pred: &[DisparityMap], gt: &[DisparityMap], far_field_rows: Range<usize>) -> Result<DisparityErrors, SpectraError> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(SpectraError::DimMismatch(format!("{} predicted vs {} true frames", pred.len(), gt.len())));
    }
    let (mut n, mut sum, mut bad, mut d1) = (0usize, 0.0, 0usize, 0usize);
    let (mut far_n, mut far_sum) = (0usize, 0.0);
    for (p, t) in pred.iter().zip(gt) {
        if !p.same_shape(t) || !p.same_shape(&gt[0]) {
            return Err(SpectraError::DimMismatch("disparity maps differ in size".into()));
        }
        for i in 0..p.h {
            for j in 0..p.w {
                let k = i * p.w + j;
                if !(p.is_valid(k) && t.is_valid(k)) {
                    continue;
                }
                let e = (p.values[k] - t.values[k]).abs();
                n += 1;
                sum += e;
                bad += usize::from(e > 1.0);
                d1 += usize::from(e > 3.0 && e > 0.05 * t.values[k].abs());
                if far_field_rows.contains(&i) {
                    far_n += 1;
                    far_sum += e;
                }
            }
        }
    }
    if n == 0 {
        return Err(SpectraError::DimMismatch("no pixel is valid in both sequences".into()));
    }
    Ok(DisparityErrors {
        epe: sum / n as f64,
        epe_far: (far_n > 0).then(|| far_sum / far_n as f64),
        bad1px: 100.0 * bad as f64 / n as f64,
        d1: 100.0 * d1 as f64 / n as f64,
        sigma_t: temporal_rms(pred),
        sigma_t_gt: temporal_rms(gt),
        samples: n,
    })
}
