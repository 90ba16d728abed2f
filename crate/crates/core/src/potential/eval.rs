use num_complex::Complex64;
use rayon::prelude::*;

use super::{PotentialCoefficients, PotentialError};
use crate::field::{Grid2D, VectorField3};

fn mode_sum(coeffs: &PotentialCoefficients, a: &[Complex64], p: [f64; 3], mut f: impl FnMut(f64, f64, f64, Complex64)) {
    let b = &coeffs.basis;
    for (&(n, m), &am) in b.modes().iter().zip(a) {
        let (kx, ky) = (b.k_n(n), b.k_m(m));
        let kappa = kx.hypot(ky);
        let w = am * (kappa * p[2]).exp() * Complex64::from_polar(1.0, kx * (p[0] - b.x0) + ky * (p[1] - b.y0));
        f(kx, ky, kappa, w);
    }
}

/// Velocity `grad Phi` at arbitrary points of frame `t_index`.
pub fn evaluate_velocity(
    coeffs: &PotentialCoefficients,
    points: &[[f64; 3]],
    t_index: usize,
) -> Result<Vec<[f64; 3]>, PotentialError> {
    let a = coeffs.frame(t_index)?;
    Ok(points
        .par_iter()
        .map(|&p| {
            let mut s = [Complex64::new(0.0, 0.0); 3];
            mode_sum(coeffs, a, p, |kx, ky, kappa, w| {
                s[0] += Complex64::new(0.0, kx) * w;
                s[1] += Complex64::new(0.0, ky) * w;
                s[2] += kappa * w;
            });
            // a mode and its conjugate partner sum to twice the real part
            [2.0 * s[0].re, 2.0 * s[1].re, 2.0 * s[2].re]
        })
        .collect())
}

/// Potential `Phi` at arbitrary points.
pub fn evaluate_potential(
    coeffs: &PotentialCoefficients,
    points: &[[f64; 3]],
    t_index: usize,
) -> Result<Vec<f64>, PotentialError> {
    let a = coeffs.frame(t_index)?;
    Ok(points
        .par_iter()
        .map(|&p| {
            let mut s = Complex64::new(0.0, 0.0);
            mode_sum(coeffs, a, p, |_, _, _, w| s += w);
            2.0 * s.re
        })
        .collect())
}

/// Analytic Laplacian of the potential; zero up to rounding.
pub fn evaluate_laplacian(
    coeffs: &PotentialCoefficients,
    points: &[[f64; 3]],
    t_index: usize,
) -> Result<Vec<f64>, PotentialError> {
    let a = coeffs.frame(t_index)?;
    Ok(points
        .par_iter()
        .map(|&p| {
            let mut s = Complex64::new(0.0, 0.0);
            mode_sum(coeffs, a, p, |kx, ky, kappa, w| s += (kappa * kappa - kx * kx - ky * ky) * w);
            2.0 * s.re
        })
        .collect())
}

/// Velocity on a horizontal grid at constant depth `z`, by separable sums.
pub fn evaluate_on_grid(
    coeffs: &PotentialCoefficients,
    grid: Grid2D,
    z: f64,
    t_index: usize,
) -> Result<VectorField3, PotentialError> {
    let a = coeffs.frame(t_index)?;
    let b = &coeffs.basis;
    let (n1, m1, mm) = (b.n_max + 1, 2 * b.m_max + 1, b.m_max as i64);
    let ex: Vec<Vec<Complex64>> = (0..n1 as i64)
        .map(|n| (0..grid.nx).map(|i| Complex64::from_polar(1.0, b.k_n(n) * (grid.x(i) - b.x0))).collect())
        .collect();
    let ey: Vec<Vec<Complex64>> = (-mm..=mm)
        .map(|m| (0..grid.ny).map(|j| Complex64::from_polar(1.0, b.k_m(m) * (grid.y(j) - b.y0))).collect())
        .collect();
    let mut out = VectorField3::zeros(grid);
    for c in 0..3 {
        let mut coef = vec![Complex64::new(0.0, 0.0); n1 * m1];
        for (&(n, m), &am) in b.modes().iter().zip(a) {
            let (kx, ky) = (b.k_n(n), b.k_m(m));
            let kappa = kx.hypot(ky);
            let f = match c {
                0 => Complex64::new(0.0, kx),
                1 => Complex64::new(0.0, ky),
                _ => Complex64::new(kappa, 0.0),
            };
            coef[n as usize * m1 + (m + mm) as usize] = am * f * (kappa * z).exp();
        }
        let rows: Vec<Vec<f64>> = (0..grid.ny)
            .into_par_iter()
            .map(|j| {
                let mut row = vec![Complex64::new(0.0, 0.0); grid.nx];
                for mi in 0..m1 {
                    let e = ey[mi][j];
                    for ni in 0..n1 {
                        let cv = coef[ni * m1 + mi];
                        if cv.re == 0.0 && cv.im == 0.0 {
                            continue;
                        }
                        let ce = cv * e;
                        for (r, x) in row.iter_mut().zip(&ex[ni]) {
                            *r += ce * x;
                        }
                    }
                }
                row.into_iter().map(|v| 2.0 * v.re).collect()
            })
            .collect();
        let dst = match c {
            0 => &mut out.ux,
            1 => &mut out.uy,
            _ => &mut out.uz,
        };
        for (j, row) in rows.into_iter().enumerate() {
            dst[j * grid.nx..(j + 1) * grid.nx].copy_from_slice(&row);
        }
    }
    Ok(out)
}

/// Centered moving average of the coefficients over `2 * half_width + 1`
/// frames (shrinking at the record ends). Off unless requested.
pub fn temporal_lowpass(coeffs: &PotentialCoefficients, half_width: usize) -> PotentialCoefficients {
    let nt = coeffs.frames.len();
    let nj = coeffs.basis.len();
    let frames = (0..nt)
        .map(|k| {
            let lo = k.saturating_sub(half_width);
            let hi = (k + half_width).min(nt - 1);
            let mut acc = vec![Complex64::new(0.0, 0.0); nj];
            for f in &coeffs.frames[lo..=hi] {
                for (a, v) in acc.iter_mut().zip(f) {
                    *a += v;
                }
            }
            let w = (hi - lo + 1) as f64;
            acc.into_iter().map(|v| v / w).collect()
        })
        .collect();
    PotentialCoefficients { frames, ..coeffs.clone() }
}
