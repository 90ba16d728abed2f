//! Nonlinear free-surface velocities from an elevation record.
//!
//! The surface potential is obtained by time-integrating
//! `T = -g eta + (dt eta)^2 / (2 (1 + |grad eta|^2))`; the vertical and
//! horizontal surface velocities then follow from the kinematic condition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::stencil::merge_masks;
use crate::field::{
    backward_time_derivative, central_gradient, fourier_time_integral, time_derivative_all, FieldError, ScalarField,
    ScalarFieldSeries, VectorField3,
};
use crate::synth::GRAVITY;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("invalid kinematics config: {0}")]
    InvalidConfig(String),
    #[error("surface potential iteration did not converge after {iterations} iterations (relative change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KinematicsConfig {
    /// Regularization of the spectral time integral, rad/s.
    pub integration_eps: f64,
    /// Refine the potential by fixed-point iteration of the full dynamic condition.
    pub iterate_full: bool,
    pub max_iters: usize,
    pub iter_tol: f64,
    pub gravity: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self { integration_eps: 0.05, iterate_full: false, max_iters: 20, iter_tol: 1e-6, gravity: GRAVITY }
    }
}

impl KinematicsConfig {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |m: String| Err(KinematicsError::InvalidConfig(m));
        if !(self.integration_eps >= 0.0 && self.integration_eps.is_finite()) {
            return bad(format!("integration_eps must be >= 0, got {}", self.integration_eps));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.iter_tol > 0.0) {
            return bad(format!("iter_tol must be positive, got {}", self.iter_tol));
        }
        if !(self.gravity > 0.0) {
            return bad(format!("gravity must be positive, got {}", self.gravity));
        }
        Ok(())
    }
}

/// Surface potential and per-frame velocities of one record.
#[derive(Clone, Debug)]
pub struct SurfaceKinematics {
    pub phi_s: ScalarFieldSeries,
    /// Frames 0 and 1 are fully invalid (no backward stencil).
    pub velocity: Vec<VectorField3>,
    /// Fixed-point iterations performed (0 on the default path).
    pub iterations: usize,
}

/// Per-frame quantities shared by every step.
struct FrameTerms {
    eta_t: ScalarField,
    gx: ScalarField,
    gy: ScalarField,
}

fn frame_terms(series: &ScalarFieldSeries) -> Vec<FrameTerms> {
    let rates = time_derivative_all(series);
    rates
        .into_par_iter()
        .zip(series.frames.par_iter())
        .map(|(eta_t, eta)| {
            let (gx, gy) = central_gradient(eta);
            FrameTerms { eta_t, gx, gy }
        })
        .collect()
}

fn tau_from_terms(eta: &ScalarField, t: &FrameTerms, gravity: f64, phi: Option<(&ScalarField, &ScalarField)>) -> ScalarField {
    let n = eta.values.len();
    let mut values = vec![0.0; n];
    for (k, v) in values.iter_mut().enumerate() {
        let (sx, sy) = (t.gx.values[k], t.gy.values[k]);
        let slope2 = 1.0 + sx * sx + sy * sy;
        let et = t.eta_t.values[k];
        *v = match phi {
            None => -gravity * eta.values[k] + 0.5 * et * et / slope2,
            Some((px, py)) => {
                let (px, py) = (px.values[k], py.values[k]);
                let w = et + px * sx + py * sy;
                -gravity * eta.values[k] - 0.5 * (px * px + py * py) + 0.5 * w * w / slope2
            }
        };
    }
    let mut fields = vec![eta, &t.eta_t, &t.gx];
    if let Some((px, py)) = phi {
        fields.push(px);
        fields.push(py);
    }
    let mask = merge_masks(&fields);
    ScalarField { grid: eta.grid, values, mask }
}

/// Dynamic-condition source term at `frame` (backward temporal stencil).
pub fn compute_tau(series: &ScalarFieldSeries, frame: usize, gravity: f64) -> Result<ScalarField, KinematicsError> {
    let eta_t = backward_time_derivative(series, frame)?;
    let eta = &series.frames[frame];
    let (gx, gy) = central_gradient(eta);
    Ok(tau_from_terms(eta, &FrameTerms { eta_t, gx, gy }, gravity, None))
}

/// Time integral of the source series with the integration constant chosen so
/// that each node's Hann-weighted time mean vanishes. A per-node constant is
/// not observable in time but would enter the spatial gradient.
fn integrate_potential(source: &ScalarFieldSeries, eps: f64) -> Result<ScalarFieldSeries, FieldError> {
    let mut phi = fourier_time_integral(source, eps)?;
    let nt = phi.len();
    let w: Vec<f64> = (0..nt)
        .map(|k| {
            let s = (std::f64::consts::PI * (k as f64 + 0.5) / nt as f64).sin();
            s * s
        })
        .collect();
    let wsum: f64 = w.iter().sum();
    let n = phi.grid.len();
    let means: Vec<f64> = (0..n)
        .map(|idx| phi.frames.iter().zip(&w).map(|(f, wk)| f.values[idx] * wk).sum::<f64>() / wsum)
        .collect();
    for f in &mut phi.frames {
        for (v, m) in f.values.iter_mut().zip(&means) {
            *v -= m;
        }
    }
    Ok(phi)
}

fn source_series(
    series: &ScalarFieldSeries,
    terms: &[FrameTerms],
    gravity: f64,
    phi_grads: Option<&[(ScalarField, ScalarField)]>,
) -> Result<ScalarFieldSeries, FieldError> {
    let frames = (0..series.len())
        .into_par_iter()
        .map(|k| {
            let phi = phi_grads.map(|g| (&g[k].0, &g[k].1));
            tau_from_terms(&series.frames[k], &terms[k], gravity, phi)
        })
        .collect();
    ScalarFieldSeries::new(series.grid, series.dt, series.t0, frames)
}

fn gradients(phi: &ScalarFieldSeries) -> Vec<(ScalarField, ScalarField)> {
    phi.frames.par_iter().map(central_gradient).collect()
}

fn relative_change(a: &ScalarFieldSeries, b: &ScalarFieldSeries) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        for (k, (&x, &y)) in fa.values.iter().zip(&fb.values).enumerate() {
            if fa.is_valid(k) && fb.is_valid(k) {
                num += (x - y) * (x - y);
                den += x * x;
            }
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

fn check_series(series: &ScalarFieldSeries) -> Result<(), FieldError> {
    if series.len() < 4 {
        return Err(FieldError::TooFewFrames { required: 4, actual: series.len() });
    }
    Ok(())
}

fn phi_with_terms(
    series: &ScalarFieldSeries,
    terms: &[FrameTerms],
    config: &KinematicsConfig,
) -> Result<(ScalarFieldSeries, usize), KinematicsError> {
    let source = source_series(series, terms, config.gravity, None)?;
    let mut phi = integrate_potential(&source, config.integration_eps)?;
    if !config.iterate_full {
        return Ok((phi, 0));
    }
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iters {
        let grads = gradients(&phi);
        let source = source_series(series, terms, config.gravity, Some(&grads))?;
        let next = integrate_potential(&source, config.integration_eps)?;
        residual = relative_change(&next, &phi);
        phi = next;
        if residual < config.iter_tol {
            return Ok((phi, it));
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(KinematicsError::NonConvergence { iterations: config.max_iters, residual })
}

/// Surface velocity potential for every frame of the record.
pub fn compute_phi_s(series: &ScalarFieldSeries, config: &KinematicsConfig) -> Result<ScalarFieldSeries, KinematicsError> {
    config.validate()?;
    check_series(series)?;
    let terms = frame_terms(series);
    Ok(phi_with_terms(series, &terms, config)?.0)
}

/// Potential and velocities in one pass.
pub fn compute_kinematics(series: &ScalarFieldSeries, config: &KinematicsConfig) -> Result<SurfaceKinematics, KinematicsError> {
    config.validate()?;
    check_series(series)?;
    let terms = frame_terms(series);
    let (phi_s, iterations) = phi_with_terms(series, &terms, config)?;
    let grads = gradients(&phi_s);
    let velocity = (0..series.len())
        .into_par_iter()
        .map(|k| {
            if k < 2 {
                VectorField3::invalid(series.grid)
            } else {
                frame_velocity(&terms[k], &grads[k])
            }
        })
        .collect();
    Ok(SurfaceKinematics { phi_s, velocity, iterations })
}

/// Per-frame surface velocities; frames 0 and 1 are invalid.
pub fn compute_surface_velocity(
    series: &ScalarFieldSeries,
    config: &KinematicsConfig,
) -> Result<Vec<VectorField3>, KinematicsError> {
    Ok(compute_kinematics(series, config)?.velocity)
}

fn frame_velocity(t: &FrameTerms, grad_phi: &(ScalarField, ScalarField)) -> VectorField3 {
    let (px, py) = grad_phi;
    let grid = px.grid;
    let mut out = VectorField3::zeros(grid);
    for k in 0..grid.len() {
        let (sx, sy) = (t.gx.values[k], t.gy.values[k]);
        let slope2 = 1.0 + sx * sx + sy * sy;
        let uz = (t.eta_t.values[k] + px.values[k] * sx + py.values[k] * sy) / slope2;
        out.uz[k] = uz;
        out.ux[k] = px.values[k] - sx * uz;
        out.uy[k] = py.values[k] - sy * uz;
    }
    out.mask = merge_masks(&[&t.eta_t, &t.gx, px]);
    out
}
