//! Frequency-domain time integration of uniformly sampled records.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{FieldError, ScalarField, ScalarFieldSeries};

/// Forward/inverse plans for one record length.
pub struct SpectralIntegrator {
    n: usize,
    dt: f64,
    eps: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralIntegrator {
    pub fn new(n: usize, dt: f64, eps: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dt,
            eps,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Integral of `signal` from the first sample, so `out[0] == 0`.
    ///
    /// The record is split into the straight line joining its start to the
    /// linear extrapolation one step past its end, plus a remainder whose
    /// periodic extension is continuous. The line and the remainder's mean are
    /// integrated in closed form; the zero-mean remainder is integrated by the
    /// regularized spectral factor `-i w / (w^2 + eps^2)` with the Nyquist bin
    /// dropped.
    pub fn integrate(&self, signal: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(signal.len(), n, "record length differs from plan");
        let dt = self.dt;
        let span = n as f64 * dt;
        let f_end = 2.0 * signal[n - 1] - signal[n - 2];
        let slope = (f_end - signal[0]) / span;
        let mut buf: Vec<Complex64> = signal
            .iter()
            .enumerate()
            .map(|(k, &f)| Complex64::new(f - (signal[0] + slope * k as f64 * dt), 0.0))
            .collect();
        self.forward.process(&mut buf);
        let mean = buf[0].re / n as f64;
        buf[0] = Complex64::new(0.0, 0.0);
        let eps2 = self.eps * self.eps;
        for (k, c) in buf.iter_mut().enumerate().skip(1) {
            if 2 * k == n {
                *c = Complex64::new(0.0, 0.0);
                continue;
            }
            let m = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
            let w = 2.0 * PI * m / span;
            *c *= Complex64::new(0.0, -w / (w * w + eps2));
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        let mut out: Vec<f64> = buf
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let t = k as f64 * dt;
                c.re * scale + mean * t + signal[0] * t + 0.5 * slope * t * t
            })
            .collect();
        let first = out[0];
        out.iter_mut().for_each(|v| *v -= first);
        out
    }
}

/// Per-node time integral of a field series, zero at the first frame.
///
/// Nodes invalid in any frame are invalid in every output frame.
pub fn fourier_time_integral(series: &ScalarFieldSeries, eps: f64) -> Result<ScalarFieldSeries, FieldError> {
    if series.len() < 4 {
        return Err(FieldError::TooFewFrames { required: 4, actual: series.len() });
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(FieldError::InvalidParameter(format!("integration eps must be >= 0, got {eps}")));
    }
    let nt = series.len();
    let g = series.grid;
    let integrator = SpectralIntegrator::new(nt, series.dt, eps);
    let columns: Vec<Option<Vec<f64>>> = (0..g.len())
        .into_par_iter()
        .map(|idx| series.node_valid(idx).then(|| integrator.integrate(&series.node_series(idx))))
        .collect();
    let any_invalid = columns.iter().any(Option::is_none);
    let frames = (0..nt)
        .map(|k| {
            let values = columns.iter().map(|c| c.as_ref().map_or(0.0, |v| v[k])).collect();
            let mask = any_invalid.then(|| columns.iter().map(Option::is_some).collect());
            ScalarField { grid: g, values, mask }
        })
        .collect();
    ScalarFieldSeries::new(g, series.dt, series.t0, frames)
}
