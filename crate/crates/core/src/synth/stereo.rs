//! Band-limited textures and warped stereo pairs with known disparity.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use super::SynthError;
use crate::field::{FieldError, Grid2D, ScalarField};
use crate::rng::substream;

/// Left/right images; `right` carries a mask where the warp left the domain.
#[derive(Clone, Debug)]
pub struct StereoPair {
    pub left: ScalarField,
    pub right: ScalarField,
}

/// Zero-mean, unit-variance random texture: white noise filtered by a
/// Gaussian of standard deviation `sigma_px` pixels (applied in Fourier space,
/// so the result is periodic).
pub fn band_limited_texture(nx: usize, ny: usize, sigma_px: f64, seed: u64) -> Result<ScalarField, SynthError> {
    if !(sigma_px > 0.0) {
        return Err(SynthError::Field(FieldError::InvalidParameter(format!(
            "texture sigma must be positive, got {sigma_px}"
        ))));
    }
    let grid = Grid2D::pixels(nx, ny)?;
    let mut rng = substream(seed, "texture");
    let mut buf: Vec<Complex64> = (0..nx * ny)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    fft2(&mut buf, nx, ny, false);
    let freq = |k: usize, n: usize| {
        let m = if 2 * k <= n { k as f64 } else { k as f64 - n as f64 };
        2.0 * std::f64::consts::PI * m / n as f64
    };
    for j in 0..ny {
        let wy = freq(j, ny);
        for i in 0..nx {
            let wx = freq(i, nx);
            buf[j * nx + i] *= (-0.5 * sigma_px * sigma_px * (wx * wx + wy * wy)).exp();
        }
    }
    buf[0] = Complex64::new(0.0, 0.0);
    fft2(&mut buf, nx, ny, true);
    let values: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let values = values.into_iter().map(|v| (v - mean) / std).collect();
    Ok(ScalarField { grid, values, mask: None })
}

/// In-place unnormalized 2D FFT of a row-major `nx * ny` buffer.
pub(crate) fn fft2(buf: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    row.process(buf);
    let mut column = vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            column[j] = buf[j * nx + i];
        }
        col.process(&mut column);
        for j in 0..ny {
            buf[j * nx + i] = column[j];
        }
    }
}

/// Keys cubic convolution weights (a = -1/2) for samples `floor(x)-1 ..= floor(x)+2`.
fn keys_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// Cubic interpolation of `row` at fractional index `x`. `None` when a sample
/// with nonzero weight lies outside the row.
pub fn cubic_sample_row(row: &[f64], x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    let base = x.floor();
    let t = x - base;
    let base = base as i64;
    let n = row.len() as i64;
    if t == 0.0 {
        return (0..n).contains(&base).then(|| row[base as usize]);
    }
    let w = keys_weights(t);
    let mut acc = 0.0;
    for (m, wm) in w.iter().enumerate() {
        let idx = base - 1 + m as i64;
        if !(0..n).contains(&idx) {
            return None;
        }
        acc += wm * row[idx as usize];
    }
    Some(acc)
}

fn linear_sample_row(row: &[f64], x: f64) -> Option<f64> {
    let n = row.len();
    if !(x >= 0.0 && x <= (n - 1) as f64) {
        return None;
    }
    let i = (x.floor() as usize).min(n.saturating_sub(2));
    let t = x - i as f64;
    Some(if n == 1 { row[0] } else { row[i] * (1.0 - t) + row[i + 1] * t })
}

/// Builds the pair seen by a rectified rig whose left image is `texture`.
///
/// Left pixel `(u, v)` with disparity `d(u, v)` appears in the right image at
/// `(u - d, v)`. The right image is therefore `texture(u + s, v)` where the
/// offset `s` solves `s = d(u + s, v)`, found by fixed-point iteration with the
/// disparity interpolated linearly along the row.
pub fn synth_stereo_pair(texture: &ScalarField, disparity: &ScalarField) -> Result<StereoPair, SynthError> {
    let g = texture.grid;
    if disparity.grid != g {
        return Err(FieldError::GridMismatch("disparity and texture grids differ".into()).into());
    }
    for v in 0..g.ny {
        for u in 0..g.nx {
            let d = disparity.at(u, v);
            if d < 0.0 || !d.is_finite() {
                return Err(SynthError::NegativeDisparity { u, v, value: d });
            }
        }
    }
    let tex = texture.filled(0.0);
    let mut values = vec![0.0; g.len()];
    let mut mask = vec![true; g.len()];
    for v in 0..g.ny {
        let tex_row = &tex[v * g.nx..(v + 1) * g.nx];
        let d_row = &disparity.values[v * g.nx..(v + 1) * g.nx];
        for u in 0..g.nx {
            let idx = v * g.nx + u;
            let sample = right_offset(d_row, u as f64)
                .filter(|&s| texture_support_valid(texture, v, u as f64 + s))
                .and_then(|s| cubic_sample_row(tex_row, u as f64 + s));
            match sample {
                Some(val) => values[idx] = val,
                None => mask[idx] = false,
            }
        }
    }
    let right = ScalarField { grid: g, values, mask: None }.with_mask(mask)?;
    Ok(StereoPair { left: texture.clone(), right })
}

fn right_offset(d_row: &[f64], u: f64) -> Option<f64> {
    let mut s = linear_sample_row(d_row, u)?;
    for _ in 0..50 {
        let next = linear_sample_row(d_row, u + s)?;
        if (next - s).abs() < 1e-12 {
            return Some(next);
        }
        s = next;
    }
    Some(s)
}

fn texture_support_valid(texture: &ScalarField, v: usize, x: f64) -> bool {
    if texture.mask.is_none() {
        return true;
    }
    let base = x.floor() as i64;
    (base - 1..=base + 2)
        .filter(|&i| i >= 0 && (i as usize) < texture.grid.nx)
        .all(|i| texture.is_valid(texture.grid.index(i as usize, v)))
}
