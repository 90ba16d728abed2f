//! Finite-difference stencils on uniform grids and uniformly sampled records.

use super::{FieldError, ScalarField, ScalarFieldSeries};

/// Second-order derivative of a uniformly sampled line at position `k`.
///
/// Interior nodes use the central stencil, the two ends use one-sided
/// second-order stencils. `valid` returns whether a sample may be used.
#[inline]
fn line_derivative(n: usize, h: f64, k: usize, f: impl Fn(usize) -> f64, valid: impl Fn(usize) -> bool) -> Option<f64> {
    if n == 2 {
        return (valid(0) && valid(1)).then(|| (f(1) - f(0)) / h);
    }
    let (idx, w): ([usize; 3], [f64; 3]) = if k == 0 {
        ([0, 1, 2], [-3.0, 4.0, -1.0])
    } else if k == n - 1 {
        ([n - 1, n - 2, n - 3], [3.0, -4.0, 1.0])
    } else {
        ([k - 1, k, k + 1], [-1.0, 0.0, 1.0])
    };
    let mut acc = 0.0;
    for (&i, &wi) in idx.iter().zip(&w) {
        if wi != 0.0 {
            if !valid(i) {
                return None;
            }
            acc += wi * f(i);
        }
    }
    Some(acc / (2.0 * h))
}

/// Spatial gradient `(d/dX, d/dY)`.
///
/// Any stencil that touches an invalid cell leaves the output cell invalid.
pub fn central_gradient(field: &ScalarField) -> (ScalarField, ScalarField) {
    let g = field.grid;
    let n = g.len();
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut ok = vec![true; n];
    let vals = &field.values;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.index(i, j);
            let dx = line_derivative(g.nx, g.dx, i, |a| vals[g.index(a, j)], |a| field.is_valid(g.index(a, j)));
            let dy = line_derivative(g.ny, g.dy, j, |b| vals[g.index(i, b)], |b| field.is_valid(g.index(i, b)));
            match (dx, dy) {
                (Some(a), Some(b)) if field.is_valid(idx) => {
                    gx[idx] = a;
                    gy[idx] = b;
                }
                _ => ok[idx] = false,
            }
        }
    }
    let mask = if ok.iter().all(|&v| v) { None } else { Some(ok) };
    (
        ScalarField { grid: g, values: gx, mask: mask.clone() },
        ScalarField { grid: g, values: gy, mask },
    )
}

/// Second-order backward difference `(3f_t - 4f_{t-1} + f_{t-2}) / (2 dt)`.
pub fn backward_time_derivative(series: &ScalarFieldSeries, frame_index: usize) -> Result<ScalarField, FieldError> {
    if frame_index < 2 {
        return Err(FieldError::IndexTooSmall { index: frame_index, minimum: 2 });
    }
    if frame_index >= series.len() {
        return Err(FieldError::IndexOutOfRange { index: frame_index, len: series.len() });
    }
    let f0 = &series.frames[frame_index];
    let f1 = &series.frames[frame_index - 1];
    let f2 = &series.frames[frame_index - 2];
    Ok(combine3(f0, f1, f2, [3.0, -4.0, 1.0], 2.0 * series.dt))
}

/// Time derivative at every frame: backward stencil from frame 2 on, forward
/// one-sided second-order stencil at frames 0 and 1.
///
/// Only whole-record operations (the Fourier time integral) consume the
/// forward-stencil frames; per-frame outputs treat frames 0 and 1 as invalid.
pub fn time_derivative_all(series: &ScalarFieldSeries) -> Vec<ScalarField> {
    (0..series.len())
        .map(|k| {
            if k >= 2 {
                combine3(&series.frames[k], &series.frames[k - 1], &series.frames[k - 2], [3.0, -4.0, 1.0], 2.0 * series.dt)
            } else {
                combine3(&series.frames[k], &series.frames[k + 1], &series.frames[k + 2], [-3.0, 4.0, -1.0], 2.0 * series.dt)
            }
        })
        .collect()
}

fn combine3(a: &ScalarField, b: &ScalarField, c: &ScalarField, w: [f64; 3], denom: f64) -> ScalarField {
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .zip(&c.values)
        .map(|((&x, &y), &z)| (w[0] * x + w[1] * y + w[2] * z) / denom)
        .collect();
    let mask = merge_masks(&[a, b, c]);
    ScalarField { grid: a.grid, values, mask }
}

/// Logical AND of the masks of congruent fields.
pub fn merge_masks(fields: &[&ScalarField]) -> Option<Vec<bool>> {
    if fields.iter().all(|f| f.mask.is_none()) {
        return None;
    }
    let n = fields[0].values.len();
    let merged: Vec<bool> = (0..n).map(|k| fields.iter().all(|f| f.is_valid(k))).collect();
    if merged.iter().all(|&v| v) {
        None
    } else {
        Some(merged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;

    fn grid(nx: usize, ny: usize, dx: f64) -> Grid2D {
        Grid2D::new(nx, ny, dx, dx, 0.0, 0.0).unwrap()
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let f = ScalarField::constant(grid(7, 5, 0.3), 2.5);
        let (gx, gy) = central_gradient(&f);
        assert!(gx.values.iter().chain(&gy.values).all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn linear_field_is_differentiated_exactly() {
        let f = ScalarField::from_fn(grid(9, 4, 0.5), |x, _| 2.0 * x);
        let (gx, gy) = central_gradient(&f);
        // one-sided second-order stencils are exact for linear data too
        assert!(gx.values.iter().all(|&v| (v - 2.0).abs() < 1e-12));
        assert!(gy.values.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn sine_gradient_within_truncation_bound() {
        let k = 1.0;
        let dx = 0.05;
        let g = grid(200, 3, dx);
        let f = ScalarField::from_fn(g, |x, _| (k * x).sin());
        let (gx, _) = central_gradient(&f);
        let bound = k * k * k * dx * dx / 6.0;
        for j in 0..g.ny {
            for i in 1..g.nx - 1 {
                let err = (gx.at(i, j) - k * (k * g.x(i)).cos()).abs();
                assert!(err <= bound, "err {err} bound {bound}");
            }
        }
    }

    #[test]
    fn invalid_cells_poison_their_stencils() {
        let g = grid(5, 5, 1.0);
        let mut mask = vec![true; 25];
        mask[g.index(2, 2)] = false;
        let f = ScalarField::from_fn(g, |x, y| x + y).with_mask(mask).unwrap();
        let (gx, _) = central_gradient(&f);
        assert!(!gx.is_valid(g.index(1, 2)));
        assert!(!gx.is_valid(g.index(3, 2)));
        assert!(!gx.is_valid(g.index(2, 1)));
        assert!(gx.is_valid(g.index(0, 0)));
    }

    fn series_from(g: Grid2D, dt: f64, n: usize, f: impl Fn(f64) -> f64) -> ScalarFieldSeries {
        let frames = (0..n).map(|k| ScalarField::constant(g, f(k as f64 * dt))).collect();
        ScalarFieldSeries::new(g, dt, 0.0, frames).unwrap()
    }

    #[test]
    fn backward_derivative_cases() {
        let g = grid(3, 3, 1.0);
        let c = series_from(g, 0.1, 4, |_| 1.7);
        assert!(backward_time_derivative(&c, 3).unwrap().values.iter().all(|v| v.abs() < 1e-12));

        let q = series_from(g, 0.1, 3, |t| t * t);
        let d = backward_time_derivative(&q, 2).unwrap();
        assert!(d.values.iter().all(|v| (v - 0.4).abs() < 1e-12));

        assert!(matches!(backward_time_derivative(&q, 1), Err(FieldError::IndexTooSmall { .. })));
    }

    #[test]
    fn backward_derivative_is_second_order() {
        let g = grid(2, 2, 1.0);
        let w = 2.0;
        let dt = 0.01;
        let s = series_from(g, dt, 200, |t| (w * t).sin());
        let mut worst: f64 = 0.0;
        for k in 2..200 {
            let d = backward_time_derivative(&s, k).unwrap().values[0];
            worst = worst.max((d - w * (w * k as f64 * dt).cos()).abs());
        }
        // leading error term is (dt^2/3) f'''
        assert!(worst <= w.powi(3) * dt * dt / 3.0 * 1.05, "worst {worst}");
    }

    #[test]
    fn forward_stencil_used_for_leading_frames() {
        let g = grid(2, 2, 1.0);
        let s = series_from(g, 0.5, 5, |t| 3.0 * t * t - t);
        let d = time_derivative_all(&s);
        for (k, f) in d.iter().enumerate() {
            let t = k as f64 * 0.5;
            assert!((f.values[0] - (6.0 * t - 1.0)).abs() < 1e-12);
        }
    }
}
