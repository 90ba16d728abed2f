use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PotentialCoefficients, PotentialError};
use crate::field::ScalarField;

#[derive(Clone, Debug)]
pub struct StreamlineOptions {
    /// Arc length per step, m.
    pub step: f64,
    pub n_steps: usize,
    /// Free surface; without it the mean level `Z = 0` bounds the water.
    pub surface: Option<ScalarField>,
    /// `[x_min, x_max, y_min, y_max]`; defaults to the basis period.
    pub bounds: Option<[f64; 4]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamlineStop {
    Completed,
    Surface,
    DomainExit,
    /// Velocity vanished; the rest of the polyline repeats the last point.
    Stagnation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Streamline {
    pub points: Vec<[f64; 3]>,
    pub stop: StreamlineStop,
}

impl Streamline {
    pub fn truncated(&self) -> bool {
        matches!(self.stop, StreamlineStop::Surface | StreamlineStop::DomainExit)
    }
}

fn velocity(coeffs: &PotentialCoefficients, a: &[Complex64], p: [f64; 3]) -> [f64; 3] {
    let b = &coeffs.basis;
    let mut s = [Complex64::new(0.0, 0.0); 3];
    for (&(n, m), &am) in b.modes().iter().zip(a) {
        let (kx, ky) = (b.k_n(n), b.k_m(m));
        let kappa = kx.hypot(ky);
        let w = am * (kappa * p[2]).exp() * Complex64::from_polar(1.0, kx * (p[0] - b.x0) + ky * (p[1] - b.y0));
        s[0] += Complex64::new(0.0, kx) * w;
        s[1] += Complex64::new(0.0, ky) * w;
        s[2] += kappa * w;
    }
    [2.0 * s[0].re, 2.0 * s[1].re, 2.0 * s[2].re]
}

/// Unit tangent of the instantaneous velocity, `None` where it vanishes.
fn direction(coeffs: &PotentialCoefficients, a: &[Complex64], p: [f64; 3]) -> Option<[f64; 3]> {
    let u = velocity(coeffs, a, p);
    let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    (norm > 1e-300).then(|| [u[0] / norm, u[1] / norm, u[2] / norm])
}

fn offset(p: [f64; 3], d: [f64; 3], h: f64) -> [f64; 3] {
    [p[0] + h * d[0], p[1] + h * d[1], p[2] + h * d[2]]
}

fn rk4(coeffs: &PotentialCoefficients, a: &[Complex64], p: [f64; 3], h: f64) -> Option<[f64; 3]> {
    let k1 = direction(coeffs, a, p)?;
    let k2 = direction(coeffs, a, offset(p, k1, h / 2.0))?;
    let k3 = direction(coeffs, a, offset(p, k2, h / 2.0))?;
    let k4 = direction(coeffs, a, offset(p, k3, h))?;
    Some(std::array::from_fn(|c| p[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c])))
}

/// Streamlines of the instantaneous field of frame `t_index`, integrated in
/// arc length with the classical fourth-order Runge-Kutta scheme.
pub fn streamlines(
    coeffs: &PotentialCoefficients,
    seeds: &[[f64; 3]],
    t_index: usize,
    options: &StreamlineOptions,
) -> Result<Vec<Streamline>, PotentialError> {
    if !(options.step > 0.0) {
        return Err(PotentialError::InvalidParameter(format!("step must be positive, got {}", options.step)));
    }
    let a = coeffs.frame(t_index)?;
    let b = &coeffs.basis;
    let bounds = options.bounds.unwrap_or([b.x0, b.x0 + b.lx, b.y0, b.y0 + b.ly]);
    let inside = |p: [f64; 3]| p[0] >= bounds[0] && p[0] <= bounds[1] && p[1] >= bounds[2] && p[1] <= bounds[3];
    let surface_at = |p: [f64; 3]| -> Option<f64> {
        match &options.surface {
            Some(s) => s.sample_bilinear(p[0], p[1]),
            None => Some(0.0),
        }
    };
    Ok(seeds
        .par_iter()
        .map(|&seed| {
            let mut points = Vec::with_capacity(options.n_steps + 1);
            points.push(seed);
            let mut p = seed;
            for _ in 0..options.n_steps {
                let Some(next) = rk4(coeffs, a, p, options.step) else {
                    points.resize(options.n_steps + 1, p);
                    return Streamline { points, stop: StreamlineStop::Stagnation };
                };
                if !inside(next) {
                    return Streamline { points, stop: StreamlineStop::DomainExit };
                }
                match surface_at(next) {
                    None => return Streamline { points, stop: StreamlineStop::DomainExit },
                    Some(z) if next[2] > z => return Streamline { points, stop: StreamlineStop::Surface },
                    _ => {}
                }
                points.push(next);
                p = next;
            }
            Streamline { points, stop: StreamlineStop::Completed }
        })
        .collect())
}
