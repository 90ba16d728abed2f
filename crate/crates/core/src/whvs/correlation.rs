use rayon::prelude::*;

use super::{check_same_dims, FeatureMap, WhvsError};
use crate::field::Tensor3;

/// Row-wise correlation `values[i][j][k]` between left pixel `(i, j)` and
/// right pixel `(i, k)`. Excluded candidates hold `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationVolume {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
}

impl CorrelationVolume {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.w + j) * self.w + k]
    }

    /// Candidates of left pixel `(i, j)`, indexed by right column.
    #[inline]
    pub fn candidates(&self, i: usize, j: usize) -> &[f64] {
        let o = (i * self.w + j) * self.w;
        &self.values[o..o + self.w]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Correlation of one row, `out[j * w + k]`. Only `k <= j` is filled; masked
/// features and `k > j` get `-inf`.
pub(crate) fn correlate_row(left: &FeatureMap, right: &FeatureMap, i: usize, out: &mut [f64]) {
    let (_, w, d) = left.dims();
    let norm = 1.0 / (d as f64).sqrt();
    out.fill(f64::NEG_INFINITY);
    for j in 0..w {
        if !left.is_valid(i, j) {
            continue;
        }
        let fl = left.tensor.vector(i, j);
        let row = &mut out[j * w..(j + 1) * w];
        for (k, c) in row.iter_mut().enumerate().take(j + 1) {
            if right.is_valid(i, k) {
                *c = norm * dot(fl, right.tensor.vector(i, k));
            }
        }
    }
}

/// Dense volume; memory is `h * w * w` values, the pipeline streams rows instead.
pub fn correlate_1d(left: &FeatureMap, right: &FeatureMap) -> Result<CorrelationVolume, WhvsError> {
    check_same_dims(left.dims(), right.dims(), "correlation inputs")?;
    if left.scale != right.scale {
        return Err(WhvsError::DimMismatch(format!("scales {} and {}", left.scale, right.scale)));
    }
    let (h, w, _) = left.dims();
    let mut values = vec![0.0; h * w * w];
    values
        .par_chunks_mut(w * w)
        .enumerate()
        .for_each(|(i, row)| correlate_row(left, right, i, row));
    Ok(CorrelationVolume { h, w, values })
}

/// Vector-Jacobian product of [`correlate_1d`]. Excluded entries carry no gradient.
pub fn correlate_1d_backward(
    left: &FeatureMap,
    right: &FeatureMap,
    grad: &CorrelationVolume,
) -> Result<(Tensor3, Tensor3), WhvsError> {
    check_same_dims(left.dims(), right.dims(), "correlation inputs")?;
    let (h, w, d) = left.dims();
    if grad.h != h || grad.w != w {
        return Err(WhvsError::DimMismatch(format!("gradient volume {}x{} for {h}x{w} features", grad.h, grad.w)));
    }
    let norm = 1.0 / (d as f64).sqrt();
    let mut dl = Tensor3::zeros(h, w, d);
    let mut dr = Tensor3::zeros(h, w, d);
    for i in 0..h {
        for j in 0..w {
            if !left.is_valid(i, j) {
                continue;
            }
            for k in 0..=j {
                if !right.is_valid(i, k) {
                    continue;
                }
                let g = norm * grad.get(i, j, k);
                if g == 0.0 {
                    continue;
                }
                let fl = left.tensor.vector(i, j).to_vec();
                let fr = right.tensor.vector(i, k).to_vec();
                for (a, b) in dl.vector_mut(i, j).iter_mut().zip(&fr) {
                    *a += g * b;
                }
                for (a, b) in dr.vector_mut(i, k).iter_mut().zip(&fl) {
                    *a += g * b;
                }
            }
        }
    }
    Ok((dl, dr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_triangle_is_excluded() {
        let t = Tensor3::from_vec(1, 3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let f = FeatureMap::new(t, 0).unwrap();
        let c = correlate_1d(&f, &f).unwrap();
        assert_eq!(c.candidates(0, 0), &[1.0, f64::NEG_INFINITY, f64::NEG_INFINITY]);
        assert_eq!(c.candidates(0, 2), &[3.0, 6.0, 9.0]);
    }

    #[test]
    fn masked_features_are_excluded() {
        let t = Tensor3::from_vec(1, 3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let f = FeatureMap::new(t, 0).unwrap();
        let r = f.clone().with_mask(vec![true, false, true]).unwrap();
        let c = correlate_1d(&f, &r).unwrap();
        assert_eq!(c.candidates(0, 2), &[3.0, f64::NEG_INFINITY, 9.0]);
        let l = f.clone().with_mask(vec![true, true, false]).unwrap();
        let c = correlate_1d(&l, &f).unwrap();
        assert!(c.candidates(0, 2).iter().all(|v| *v == f64::NEG_INFINITY));
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let a = FeatureMap::new(Tensor3::zeros(2, 3, 1), 0).unwrap();
        let b = FeatureMap::new(Tensor3::zeros(2, 4, 1), 0).unwrap();
        assert!(matches!(correlate_1d(&a, &b), Err(WhvsError::DimMismatch(_))));
        let c = FeatureMap::new(Tensor3::zeros(2, 3, 1), 1).unwrap();
        assert!(correlate_1d(&a, &c).is_err());
    }
}
