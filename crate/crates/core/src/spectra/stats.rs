use serde::{Deserialize, Serialize};

use super::{Psd, SpectraError};

/// Tail fit range as multiples of the peak frequency; the upper end is also
/// capped at `0.8 f_Nyquist`.
pub const DEFAULT_TAIL_RANGE: (f64, f64) = (1.5, 4.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveStats {
    /// Significant wave height `4 sqrt(m0)`, m.
    pub hs: f64,
    /// Peak frequency, Hz.
    pub fp: f64,
    /// Peak period `1 / fp`, s.
    pub tp: f64,
    /// Log-log slope of the spectral tail; `None` with fewer than three
    /// positive bins in the fit range.
    pub tail_slope: Option<f64>,
    pub m0: f64,
}

/// Integral parameters of a frequency spectrum. The peak is the largest
/// non-DC bin, refined by a parabola through it and its neighbours.
pub fn wave_stats(psd: &Psd, tail_range: (f64, f64)) -> Result<WaveStats, SpectraError> {
    let (lo, hi) = tail_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(SpectraError::InvalidParameter(format!("invalid tail range {tail_range:?}")));
    }
    let p = &psd.power;
    if p.len() < 3 {
        return Err(SpectraError::TooShort { required: 3, actual: p.len() });
    }
    let (peak, &pmax) = p
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let pmin = p[1..].iter().copied().fold(f64::INFINITY, f64::min);
    if !(pmax > 0.0) || pmax == pmin {
        return Err(SpectraError::NoPeak);
    }
    let mut fp = psd.freqs[peak];
    if peak + 1 < p.len() {
        let (a, b, c) = (p[peak - 1], p[peak], p[peak + 1]);
        let curv = a - 2.0 * b + c;
        if curv < 0.0 {
            fp += 0.5 * (a - c) / curv * psd.df;
        }
    }
    let m0 = psd.m0();
    let f_lo = lo * fp;
    let f_hi = (hi * fp).min(0.8 * psd.nyquist());
    let points: Vec<(f64, f64)> = psd
        .freqs
        .iter()
        .zip(p)
        .filter(|(f, v)| **f >= f_lo && **f <= f_hi && **v > 0.0)
        .map(|(f, v)| (f.ln(), v.ln()))
        .collect();
    let tail_slope = (points.len() >= 3).then(|| {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(WaveStats { hs: 4.0 * m0.sqrt(), fp, tp: 1.0 / fp, tail_slope, m0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psd(power: Vec<f64>, df: f64) -> Psd {
        Psd { freqs: (0..power.len()).map(|k| k as f64 * df).collect(), power, df }
    }

    #[test]
    fn hs_from_variance() {
        // variance 0.01 spread over a peaked spectrum
        let mut power = vec![0.0; 50];
        power[10] = 0.005 / 0.02;
        power[9] = 0.0025 / 0.02;
        power[11] = 0.0025 / 0.02;
        let s = wave_stats(&psd(power, 0.02), DEFAULT_TAIL_RANGE).unwrap();
        assert!((s.hs - 0.4).abs() < 1e-12);
        assert!((s.fp - 0.2).abs() < 1e-12);
        assert!((s.tp - 5.0).abs() < 1e-9);
    }

    #[test]
    fn parabolic_refinement_recovers_vertex() {
        let df = 0.01;
        let power: Vec<f64> = (0..40).map(|k| (10.0 - (k as f64 * df - 0.2137).powi(2) * 1e3).max(0.0)).collect();
        let s = wave_stats(&psd(power, df), DEFAULT_TAIL_RANGE).unwrap();
        assert!((s.fp - 0.2137).abs() < 1e-9);
    }

    #[test]
    fn flat_spectrum_has_no_peak() {
        assert!(matches!(wave_stats(&psd(vec![1.0; 20], 0.1), DEFAULT_TAIL_RANGE), Err(SpectraError::NoPeak)));
        assert!(matches!(wave_stats(&psd(vec![0.0; 20], 0.1), DEFAULT_TAIL_RANGE), Err(SpectraError::NoPeak)));
    }

    #[test]
    fn power_law_tail() {
        let df = 0.005;
        let fp = 0.35;
        let power: Vec<f64> = (0..400)
            .map(|k| {
                let f = k as f64 * df;
                if f >= fp { (f / fp).powi(-5) } else { (f / fp).powi(8) }
            })
            .collect();
        let s = wave_stats(&psd(power, df), DEFAULT_TAIL_RANGE).unwrap();
        assert!((s.tail_slope.unwrap() + 5.0).abs() < 1e-9);
    }
}
