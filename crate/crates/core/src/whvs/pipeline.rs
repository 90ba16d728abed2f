use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::correlate_row;
use super::soft::soft_match;
use super::{
    attention_refine, downsample, match_features, modulate, reference_features, temporal_fuse, upsample_disparity,
    DisparityEstimator, DisparityMap, FeatureConfig, FeatureMap, FilmMlp, TemporalFusionConfig, WhvsError,
};
use crate::field::ScalarField;
use crate::geometry::StereoRig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Number of resolutions, full resolution first, each half the previous.
    pub scales: usize,
    /// A pixel whose best candidate has a mean normalized cross-correlation
    /// below this is left without a disparity.
    pub min_match_score: f64,
    pub features: FeatureConfig,
    pub temporal: TemporalFusionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { scales: 3, min_match_score: 0.8, features: FeatureConfig::default(), temporal: TemporalFusionConfig::default() }
    }
}

/// Multi-scale matcher: per scale FiLM, row correlation, soft matching and
/// self-attention; coarse estimates are upsampled and averaged into finer
/// ones, then a last attention pass runs at full resolution.
#[derive(Clone, Debug)]
pub struct WhvsPipeline {
    pub config: PipelineConfig,
    pub film: FilmMlp,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl WhvsPipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, WhvsError> {
        config.features.validate()?;
        config.temporal.validate()?;
        if !(0.0..1.0).contains(&config.min_match_score) {
            return Err(WhvsError::InvalidParameter(format!(
                "min_match_score must lie in [0, 1), got {}",
                config.min_match_score
            )));
        }
        if config.scales == 0 {
            return Err(WhvsError::InvalidParameter("at least one scale is required".into()));
        }
        let film = FilmMlp::zeros(config.features.match_channels());
        Ok(Self {
            config,
            film,
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            translation: [0.0; 3],
        })
    }

    pub fn with_rig(mut self, rig: &StereoRig) -> Self {
        self.rotation = rig.r;
        self.translation = rig.t;
        self
    }

    pub fn with_film(mut self, film: FilmMlp) -> Result<Self, WhvsError> {
        film.validate()?;
        if film.channels() != self.config.features.match_channels() {
            return Err(WhvsError::DimMismatch(format!(
                "FiLM predicts {} channels, features have {}",
                film.channels(),
                self.config.features.match_channels()
            )));
        }
        self.film = film;
        Ok(self)
    }

    fn scale_estimate(&self, left: &ScalarField, right: &ScalarField, scale: u32) -> Result<DisparityMap, WhvsError> {
        let cfg = &self.config.features;
        let params = self.film.forward(&self.rotation, &self.translation);
        let fl = modulate(&match_features(left, cfg, scale)?, &params)?;
        let fr = modulate(&match_features(right, cfg, scale)?, &params)?;
        let d = row_matches(&fl, &fr, self.config.min_match_score * cfg.match_temperature);
        if scale > 0 {
            attention_refine(&d, &reference_features(left, cfg, scale)?)
        } else {
            Ok(d)
        }
    }
}

const PEAK_GUARD: usize = 2;

/// Soft disparity computed row by row, so only one `w x w` slice of the
/// correlation volume is alive per worker.
fn row_matches(left: &FeatureMap, right: &FeatureMap, min_logit: f64) -> DisparityMap {
    let (h, w, _) = left.dims();
    let rows: Vec<Vec<Option<f64>>> = (0..h)
        .into_par_iter()
        .map_init(
            || vec![0.0; w * w],
            |buf, i| {
                correlate_row(left, right, i, buf);
                (0..w)
                    .map(|j| {
                        let row = &buf[j * w..j * w + j + 1];
                        let (arg, best) = row
                            .iter()
                            .copied()
                            .enumerate()
                            .fold((0, f64::NEG_INFINITY), |acc, (k, c)| if c > acc.1 { (k, c) } else { acc });
                        // a peak next to excluded right features may be the flank of a hidden one
                        let near_gap = (arg.saturating_sub(PEAK_GUARD)..(arg + PEAK_GUARD + 1).min(w))
                            .any(|k| !right.is_valid(i, k));
                        if best < min_logit || near_gap {
                            None
                        } else {
                            soft_match(row, j)
                        }
                    })
                    .collect()
            },
        )
        .collect();
    let flat: Vec<Option<f64>> = rows.into_iter().flatten().collect();
    let values = flat.iter().map(|v| v.unwrap_or(0.0)).collect();
    let mask = flat.iter().map(Option::is_some).collect();
    DisparityMap { h, w, values, mask: None }.with_mask(mask).expect("mask sized to map")
}

/// Average of the finer estimate and the upsampled coarser one; the finer
/// estimate alone where the coarser is missing.
fn fuse(fine: &DisparityMap, coarse_up: &DisparityMap) -> DisparityMap {
    let values = (0..fine.values.len())
        .map(|k| {
            if coarse_up.is_valid(k) {
                0.5 * (fine.values[k] + coarse_up.values[k])
            } else {
                fine.values[k]
            }
        })
        .collect();
    DisparityMap { h: fine.h, w: fine.w, values, mask: fine.mask.clone() }
}

impl WhvsPipeline {
    /// Unfused per-scale estimates, finest first, each in pixels of its own scale.
    pub fn scale_estimates(&self, left: &ScalarField, right: &ScalarField) -> Result<Vec<DisparityMap>, WhvsError> {
        if left.grid.nx != right.grid.nx || left.grid.ny != right.grid.ny {
            return Err(WhvsError::DimMismatch("left and right images differ in size".into()));
        }
        let mut pyramid = vec![(left.clone(), right.clone())];
        for _ in 1..self.config.scales {
            let (l, r) = pyramid.last().expect("non-empty");
            if l.grid.nx < 4 || l.grid.ny < 4 {
                break;
            }
            pyramid.push((downsample(l)?, downsample(r)?));
        }
        pyramid.iter().enumerate().map(|(s, (l, r))| self.scale_estimate(l, r, s as u32)).collect()
    }
}

impl DisparityEstimator for WhvsPipeline {
    fn estimate(&self, left: &ScalarField, right: &ScalarField) -> Result<DisparityMap, WhvsError> {
        let mut estimate: Option<DisparityMap> = None;
        for d in self.scale_estimates(left, right)?.into_iter().rev() {
            estimate = Some(match estimate {
                None => d,
                Some(coarse) => fuse(&d, &upsample_disparity(&coarse, d.h, d.w)),
            });
        }
        let d = estimate.expect("at least one scale");
        attention_refine(&d, &reference_features(left, &self.config.features, 0)?)
    }

    /// Per-frame estimates blended with the previous and next frames.
    fn estimate_sequence(&self, pairs: &[(ScalarField, ScalarField)]) -> Result<Vec<DisparityMap>, WhvsError> {
        let raw: Vec<DisparityMap> = pairs.iter().map(|(l, r)| self.estimate(l, r)).collect::<Result<_, _>>()?;
        (0..raw.len())
            .map(|t| {
                let prev = &raw[t.saturating_sub(1)];
                let next = &raw[(t + 1).min(raw.len() - 1)];
                temporal_fuse(prev, &raw[t], next, &self.config.temporal)
            })
            .collect()
    }
}
