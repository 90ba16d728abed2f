use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{hann, SpectraError};
use crate::field::ScalarFieldSeries;

/// One-sided power spectral density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    /// Hz, `k * df` from zero.
    pub freqs: Vec<f64>,
    /// Units of signal squared per Hz.
    pub power: Vec<f64>,
    pub df: f64,
}

impl Psd {
    /// `sum(power) * df`, the variance the spectrum carries.
    pub fn m0(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df
    }

    pub fn nyquist(&self) -> f64 {
        *self.freqs.last().unwrap_or(&0.0)
    }

    /// `freq_hz,power` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,power\n");
        for (f, p) in self.freqs.iter().zip(&self.power) {
            out.push_str(&format!("{f},{p}\n"));
        }
        out
    }
}

struct Welch {
    segment_len: usize,
    step: usize,
    window: Vec<f64>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    dt: f64,
}

impl Welch {
    fn new(len: usize, dt: f64, segment_len: usize, overlap: f64) -> Result<Self, SpectraError> {
        if segment_len < 16 {
            return Err(SpectraError::TooShort { required: 16, actual: segment_len });
        }
        if len < segment_len {
            return Err(SpectraError::TooShort { required: segment_len, actual: len });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SpectraError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(SpectraError::InvalidParameter(format!("overlap must lie in [0, 1), got {overlap}")));
        }
        let step = ((segment_len as f64 * (1.0 - overlap)).round() as usize).max(1);
        Ok(Self {
            segment_len,
            step,
            window: hann(segment_len),
            fft: FftPlanner::new().plan_fft_forward(segment_len),
            dt,
        })
    }

    fn bins(&self) -> usize {
        self.segment_len / 2 + 1
    }

    /// Adds the segment-averaged one-sided periodogram of `signal` to `acc`.
    fn accumulate(&self, signal: &[f64], acc: &mut [f64]) {
        let n = self.segment_len;
        let norm = self.dt / self.window.iter().map(|w| w * w).sum::<f64>();
        let starts: Vec<usize> = (0..=signal.len() - n).step_by(self.step).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for &s in &starts {
            let seg = &signal[s..s + n];
            let mean = seg.iter().sum::<f64>() / n as f64;
            for k in 0..n {
                buf[k] = Complex64::new((seg[k] - mean) * self.window[k], 0.0);
            }
            self.fft.process(&mut buf);
            for (k, a) in acc.iter_mut().enumerate() {
                let one_sided = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
                *a += one_sided * norm * buf[k].norm_sqr() / starts.len() as f64;
            }
        }
    }

    fn finish(&self, power: Vec<f64>) -> Psd {
        let df = 1.0 / (self.segment_len as f64 * self.dt);
        Psd { freqs: (0..power.len()).map(|k| k as f64 * df).collect(), power, df }
    }
}

/// Welch estimate: Hann-windowed, mean-removed segments of `segment_len`
/// samples overlapping by the fraction `overlap`, averaged periodograms,
/// one-sided and normalized by the window power so `sum(power) df` is the
/// signal variance.
pub fn compute_psd(signal: &[f64], dt: f64, segment_len: usize, overlap: f64) -> Result<Psd, SpectraError> {
    let welch = Welch::new(signal.len(), dt, segment_len, overlap)?;
    let mut power = vec![0.0; welch.bins()];
    welch.accumulate(signal, &mut power);
    Ok(welch.finish(power))
}

/// Welch spectrum averaged over every node valid in all frames.
pub fn field_psd(series: &ScalarFieldSeries, segment_len: usize, overlap: f64) -> Result<Psd, SpectraError> {
    let welch = Welch::new(series.len(), series.dt, segment_len, overlap)?;
    let nodes: Vec<usize> = (0..series.grid.len()).filter(|&k| series.node_valid(k)).collect();
    if nodes.is_empty() {
        return Err(SpectraError::TooShort { required: 1, actual: 0 });
    }
    let mut power = vec![0.0; welch.bins()];
    let mut node = vec![0.0; welch.bins()];
    for &k in &nodes {
        node.fill(0.0);
        welch.accumulate(&series.node_series(k), &mut node);
        for (p, v) in power.iter_mut().zip(&node) {
            *p += v / nodes.len() as f64;
        }
    }
    Ok(welch.finish(power))
}
