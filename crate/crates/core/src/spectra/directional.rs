use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{hann, SpectraError};
use crate::field::ScalarFieldSeries;

pub const THETA_BINS: usize = 181;

/// Frequency-direction density; directions are where waves travel to,
/// degrees counter-clockwise from +X.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalSpectrum {
    pub thetas: Vec<f64>,
    pub freqs: Vec<f64>,
    /// `density[f][theta]`, m^2/Hz/deg.
    pub density: Vec<Vec<f64>>,
    pub dtheta: f64,
    pub df: f64,
}

impl DirectionalSpectrum {
    pub fn total(&self) -> f64 {
        self.density.iter().flatten().sum::<f64>() * self.dtheta * self.df
    }

    /// `(theta, f)` of the largest density.
    pub fn peak(&self) -> (f64, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, row) in self.density.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v > best.2 {
                    best = (i, j, *v);
                }
            }
        }
        (self.thetas[best.1], self.freqs[best.0])
    }

    /// Density integrated over frequency, m^2/deg.
    pub fn theta_marginal(&self) -> Vec<f64> {
        (0..self.thetas.len())
            .map(|j| self.density.iter().map(|row| row[j]).sum::<f64>() * self.df)
            .collect()
    }

    /// First row `freq_hz` then the directions; one row per frequency.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz");
        for t in &self.thetas {
            out.push_str(&format!(",{t}"));
        }
        out.push('\n');
        for (f, row) in self.freqs.iter().zip(&self.density) {
            out.push_str(&f.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn fft_axis(buf: &mut [Complex64], dims: [usize; 3], axis: usize) {
    let [nt, ny, nx] = dims;
    let n = dims[axis];
    let stride = match axis {
        0 => ny * nx,
        1 => nx,
        _ => 1,
    };
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let total = nt * ny * nx;
    for base in 0..total {
        // first element of each line along `axis`
        if (base / stride) % n != 0 {
            continue;
        }
        for k in 0..n {
            line[k] = buf[base + k * stride];
        }
        fft.process(&mut line);
        for k in 0..n {
            buf[base + k * stride] = line[k];
        }
    }
}

/// 3D periodogram of the Hann-windowed, mean-removed record, resampled per
/// positive frequency onto polar wavenumber coordinates (bilinear), integrated
/// over `|k|` and scaled so the double integral equals the record variance.
///
/// A component `cos(k.x - w t)` appears at `(-k, +w)`, so the direction of
/// travel at a positive frequency bin is read from the mirrored wavenumber.
pub fn directional_spectrum(series: &ScalarFieldSeries) -> Result<DirectionalSpectrum, SpectraError> {
    let g = series.grid;
    let (nx, ny, nt) = (g.nx, g.ny, series.len());
    if nx < 8 || ny < 8 {
        return Err(SpectraError::TooShort { required: 8, actual: nx.min(ny) });
    }
    if nt < 16 {
        return Err(SpectraError::TooShort { required: 16, actual: nt });
    }
    let valid: Vec<bool> = (0..g.len()).map(|k| series.node_valid(k)).collect();
    let n_valid = valid.iter().filter(|v| **v).count();
    let mut mean = 0.0;
    for f in &series.frames {
        mean += valid.iter().zip(&f.values).filter(|(v, _)| **v).map(|(_, x)| x).sum::<f64>();
    }
    let count = (n_valid * nt).max(1) as f64;
    mean /= count;
    let variance = series
        .frames
        .iter()
        .map(|f| valid.iter().zip(&f.values).filter(|(v, _)| **v).map(|(_, x)| (x - mean).powi(2)).sum::<f64>())
        .sum::<f64>()
        / count;

    let (wt, wy, wx) = (hann(nt), hann(ny), hann(nx));
    let mut buf = vec![Complex64::new(0.0, 0.0); nt * ny * nx];
    for (t, frame) in series.frames.iter().enumerate() {
        for j in 0..ny {
            for i in 0..nx {
                let k = g.index(i, j);
                if valid[k] {
                    buf[(t * ny + j) * nx + i] = Complex64::new((frame.values[k] - mean) * wt[t] * wy[j] * wx[i], 0.0);
                }
            }
        }
    }
    let dims = [nt, ny, nx];
    for axis in 0..3 {
        fft_axis(&mut buf, dims, axis);
    }

    let dkx = 2.0 * std::f64::consts::PI / (nx as f64 * g.dx);
    let dky = 2.0 * std::f64::consts::PI / (ny as f64 * g.dy);
    let df = 1.0 / (nt as f64 * series.dt);
    let k_max = (std::f64::consts::PI / g.dx).min(std::f64::consts::PI / g.dy);
    let dk = 0.5 * dkx.min(dky);
    let radii: Vec<f64> = (0..).map(|j| (j as f64 + 0.5) * dk).take_while(|k| *k < k_max).collect();
    let dtheta = 360.0 / THETA_BINS as f64;
    let thetas: Vec<f64> = (0..THETA_BINS).map(|i| i as f64 * dtheta).collect();
    let directions: Vec<(f64, f64)> = thetas.iter().map(|t| (t.to_radians().cos(), t.to_radians().sin())).collect();

    let freqs: Vec<f64> = (1..=nt / 2).map(|p| p as f64 * df).collect();
    let mut density = Vec::with_capacity(freqs.len());
    for p in 1..=nt / 2 {
        let one_sided = if 2 * p == nt { 1.0 } else { 2.0 };
        let plane = &buf[p * ny * nx..(p + 1) * ny * nx];
        let sample = |kx: f64, ky: f64| -> f64 {
            let fx = (kx / dkx).rem_euclid(nx as f64);
            let fy = (ky / dky).rem_euclid(ny as f64);
            let (i0, j0) = (fx.floor() as usize % nx, fy.floor() as usize % ny);
            let (tx, ty) = (fx - fx.floor(), fy - fy.floor());
            let (i1, j1) = ((i0 + 1) % nx, (j0 + 1) % ny);
            let at = |i: usize, j: usize| plane[j * nx + i].norm_sqr();
            (1.0 - ty) * ((1.0 - tx) * at(i0, j0) + tx * at(i1, j0)) + ty * ((1.0 - tx) * at(i0, j1) + tx * at(i1, j1))
        };
        let row: Vec<f64> = directions
            .iter()
            .map(|(c, s)| one_sided * radii.iter().map(|&k| sample(-k * c, -k * s) * k * dk).sum::<f64>())
            .collect();
        density.push(row);
    }
    let total: f64 = density.iter().flatten().sum::<f64>() * dtheta * df;
    if total > 0.0 {
        let scale = variance / total;
        density.iter_mut().flatten().for_each(|v| *v *= scale);
    }
    Ok(DirectionalSpectrum { thetas, freqs, density, dtheta, df })
}
