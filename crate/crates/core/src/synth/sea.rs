//! Random-phase sea states and the test-set condition presets.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SynthError, WaveComponent};
use crate::rng::substream;

/// Parameters of a short-crested random sea.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaStateSpec {
    /// Significant wave height, m.
    pub hs: f64,
    /// Peak frequency, Hz.
    pub fp: f64,
    /// Exponent `s` of the `cos^{2s}(theta/2)` directional spreading.
    #[serde(default = "default_spreading")]
    pub gamma_spread: f64,
    /// Mean propagation direction, degrees counter-clockwise from +X.
    #[serde(default = "default_theta_mean")]
    pub theta_mean: f64,
    #[serde(default = "default_components")]
    pub n_components: usize,
    #[serde(default)]
    pub seed: u64,
    /// JONSWAP peak enhancement factor.
    #[serde(default = "default_peak_enhancement")]
    pub peak_enhancement: f64,
    /// Frequency band sampled, as multiples of `fp`.
    #[serde(default = "default_band")]
    pub band: (f64, f64),
    /// Snap component frequencies to multiples of this resolution (Hz) so that
    /// records of length `1/df` hold whole periods.
    #[serde(default)]
    pub frequency_resolution: Option<f64>,
}

fn default_spreading() -> f64 {
    10.0
}
fn default_theta_mean() -> f64 {
    95.0
}
fn default_components() -> usize {
    128
}
fn default_peak_enhancement() -> f64 {
    3.3
}
fn default_band() -> (f64, f64) {
    (0.5, 4.0)
}

impl SeaStateSpec {
    pub fn new(hs: f64, fp: f64, seed: u64) -> Self {
        Self {
            hs,
            fp,
            gamma_spread: default_spreading(),
            theta_mean: default_theta_mean(),
            n_components: default_components(),
            seed,
            peak_enhancement: default_peak_enhancement(),
            band: default_band(),
            frequency_resolution: None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSeaState(m));
        if !(self.hs > 0.0) {
            return bad(format!("hs must be positive, got {}", self.hs));
        }
        if !(self.fp > 0.0) {
            return bad(format!("fp must be positive, got {}", self.fp));
        }
        if self.n_components == 0 {
            return bad("n_components must be at least 1".into());
        }
        if !(self.gamma_spread >= 0.0) {
            return bad(format!("spreading exponent must be >= 0, got {}", self.gamma_spread));
        }
        if !(self.band.0 > 0.0 && self.band.1 > self.band.0) {
            return bad(format!("invalid band {:?}", self.band));
        }
        if let Some(df) = self.frequency_resolution {
            if !(df > 0.0) {
                return bad(format!("frequency resolution must be positive, got {df}"));
            }
        }
        Ok(())
    }

    /// Draws the component list. Amplitudes follow a JONSWAP frequency
    /// spectrum, one direction per frequency from the spreading function,
    /// uniform random phases. Amplitudes are scaled so `sum(a^2/2) = (hs/4)^2`.
    pub fn components(&self, gravity: f64) -> Result<Vec<WaveComponent>, SynthError> {
        self.validate()?;
        let n = self.n_components;
        let (lo, hi) = (self.band.0 * self.fp, self.band.1 * self.fp);
        let df = (hi - lo) / n as f64;
        let mut freqs: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * df).collect();
        if let Some(res) = self.frequency_resolution {
            for f in &mut freqs {
                *f = ((*f / res).round() * res).max(res);
            }
            freqs.dedup_by(|a, b| (*a - *b).abs() < 0.5 * res);
        }
        let weights: Vec<f64> = freqs.iter().map(|&f| jonswap_shape(f, self.fp, self.peak_enhancement)).collect();
        let total: f64 = weights.iter().sum();
        let m0 = (self.hs / 4.0).powi(2);

        let mut dir_rng = substream(self.seed, "directions");
        let mut phase_rng = substream(self.seed, "phases");
        let mean = self.theta_mean.to_radians();
        Ok(freqs
            .iter()
            .zip(&weights)
            .map(|(&f, &w)| {
                let amplitude = (2.0 * m0 * w / total).sqrt();
                let direction = mean + sample_spreading(&mut dir_rng, self.gamma_spread);
                let phase = phase_rng.random::<f64>() * 2.0 * PI;
                WaveComponent::from_frequency(amplitude, f, direction, phase, gravity)
            })
            .collect())
    }
}

/// Unnormalized JONSWAP spectral shape.
pub fn jonswap_shape(f: f64, fp: f64, gamma: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    let sigma = if f <= fp { 0.07 } else { 0.09 };
    let r = ((f - fp) / (sigma * fp)).powi(2);
    f.powi(-5) * (-1.25 * (fp / f).powi(4)).exp() * gamma.powf((-0.5 * r).exp())
}

/// Offset from the mean direction drawn from `cos^{2s}(theta/2)` on `(-pi, pi]`.
fn sample_spreading(rng: &mut impl Rng, s: f64) -> f64 {
    loop {
        let th = (rng.random::<f64>() * 2.0 - 1.0) * PI;
        if rng.random::<f64>() <= (th / 2.0).cos().powf(2.0 * s) {
            return th;
        }
    }
}

/// One row of the hydrodynamic-conditions table used for the test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionPreset {
    pub id: String,
    /// m
    pub hs: f64,
    /// Hz
    pub fp: f64,
    /// s, as tabulated (not recomputed from fp)
    pub tp: f64,
    /// Stereo baseline, m
    pub baseline: f64,
    /// deg
    pub theta_mean: f64,
    pub gamma_spread: f64,
}

impl ConditionPreset {
    pub fn sea_state(&self, seed: u64) -> SeaStateSpec {
        SeaStateSpec {
            theta_mean: self.theta_mean,
            gamma_spread: self.gamma_spread,
            ..SeaStateSpec::new(self.hs, self.fp, seed)
        }
    }
}

const PRESET_SOURCES: [(&str, &str); 6] = [
    ("A1", include_str!("../../presets/A1.json")),
    ("A2", include_str!("../../presets/A2.json")),
    ("A3", include_str!("../../presets/A3.json")),
    ("B1", include_str!("../../presets/B1.json")),
    ("B2", include_str!("../../presets/B2.json")),
    ("B3", include_str!("../../presets/B3.json")),
];

pub fn preset_ids() -> impl Iterator<Item = &'static str> {
    PRESET_SOURCES.iter().map(|(id, _)| *id)
}

pub fn preset(id: &str) -> Result<ConditionPreset, SynthError> {
    let (_, src) = PRESET_SOURCES
        .iter()
        .find(|(k, _)| *k == id)
        .ok_or_else(|| SynthError::UnknownPreset(id.to_string()))?;
    serde_json::from_str(src).map_err(|e| SynthError::InvalidSeaState(format!("preset {id}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::GRAVITY;

    #[test]
    fn table_presets_load() {
        let a1 = preset("A1").unwrap();
        assert_eq!((a1.hs, a1.fp, a1.tp, a1.baseline), (0.45, 0.35, 2.94, 2.03));
        let b1 = preset("B1").unwrap();
        assert_eq!((b1.hs, b1.fp, b1.tp, b1.baseline), (0.65, 0.19, 5.27, 1.872));
        assert_eq!(preset_ids().count(), 6);
        for id in preset_ids() {
            assert_eq!(preset(id).unwrap().id, id);
        }
        assert!(matches!(preset("C9"), Err(SynthError::UnknownPreset(_))));
    }

    #[test]
    fn components_carry_generator_variance() {
        let spec = SeaStateSpec::new(0.45, 0.35, 11);
        let comps = spec.components(GRAVITY).unwrap();
        assert_eq!(comps.len(), spec.n_components);
        let m0: f64 = comps.iter().map(|c| c.amplitude * c.amplitude / 2.0).sum();
        assert!((4.0 * m0.sqrt() - 0.45).abs() < 1e-12);
        assert!(comps.iter().all(|c| c.check(GRAVITY).is_ok()));
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = SeaStateSpec::new(0.5, 0.3, 3).components(GRAVITY).unwrap();
        let b = SeaStateSpec::new(0.5, 0.3, 3).components(GRAVITY).unwrap();
        let c = SeaStateSpec::new(0.5, 0.3, 4).components(GRAVITY).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spreading_centres_on_mean_direction() {
        let mut spec = SeaStateSpec::new(0.5, 0.3, 9);
        spec.n_components = 2000;
        spec.gamma_spread = 20.0;
        let comps = spec.components(GRAVITY).unwrap();
        let (sx, sy) = comps.iter().fold((0.0, 0.0), |(x, y), c| {
            let k = c.wavenumber();
            (x + c.kx / k, y + c.ky / k)
        });
        let mean = sy.atan2(sx).to_degrees();
        assert!((mean - 95.0).abs() < 2.0, "mean direction {mean}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = SeaStateSpec::new(0.5, 0.3, 0);
        s.hs = 0.0;
        assert!(s.components(GRAVITY).is_err());
        let mut s = SeaStateSpec::new(0.5, 0.3, 0);
        s.n_components = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn jonswap_peaks_at_fp() {
        let fp = 0.35;
        let best = (1..2000)
            .map(|i| i as f64 * 0.0005)
            .max_by(|a, b| jonswap_shape(*a, fp, 3.3).total_cmp(&jonswap_shape(*b, fp, 3.3)))
            .unwrap();
        assert!((best - fp).abs() < 0.001);
    }
}
