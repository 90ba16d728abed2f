//! Deterministic stand-in for a learned backbone: normalized multi-level
//! patches for matching and neighbour differences for attention.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DisparityMap, FeatureMap, WhvsError};
use crate::field::{Grid2D, ScalarField, Tensor3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Patch half-width in samples; patches are `(2r+1)^2`.
    pub patch_radius: usize,
    /// Blur levels per match feature; level `l` samples with spacing `2^l`.
    pub pyramid_levels: usize,
    /// Correlation equals this times the mean normalized cross-correlation.
    pub match_temperature: f64,
    /// Neighbour offset of the reference features, pixels.
    pub reference_dilation: usize,
    /// Self-similarity logit of a reference feature.
    pub attention_temperature: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            patch_radius: 2,
            pyramid_levels: 3,
            match_temperature: 50.0,
            reference_dilation: 2,
            attention_temperature: 1000.0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), WhvsError> {
        let bad = |m: String| Err(WhvsError::InvalidParameter(m));
        if self.pyramid_levels == 0 || self.pyramid_levels > 6 {
            return bad(format!("pyramid_levels must be in 1..=6, got {}", self.pyramid_levels));
        }
        if self.patch_radius == 0 || self.reference_dilation == 0 {
            return bad("patch_radius and reference_dilation must be at least 1".into());
        }
        if !(self.match_temperature > 0.0 && self.attention_temperature > 0.0) {
            return bad("temperatures must be positive".into());
        }
        Ok(())
    }

    pub fn match_channels(&self) -> usize {
        self.pyramid_levels * (2 * self.patch_radius + 1).pow(2)
    }

    /// Pixels around a location that a match feature depends on.
    fn match_support(&self) -> usize {
        let top = self.pyramid_levels - 1;
        self.patch_radius * (1 << top) + blur_radius(level_sigma(top))
    }
}

fn level_sigma(level: usize) -> f64 {
    if level == 0 {
        0.0
    } else {
        0.5 * (1u64 << level) as f64
    }
}

fn blur_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

#[inline]
fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable Gaussian blur with replicated borders.
fn blur(values: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return values.to_vec();
    }
    let r = blur_radius(sigma) as isize;
    let kernel: Vec<f64> = (-r..=r).map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let mut tmp = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            tmp[i * w + j] = (-r..=r)
                .zip(&kernel)
                .map(|(k, c)| c * values[i * w + clamp(j as isize + k, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            out[i * w + j] = (-r..=r).zip(&kernel).map(|(k, c)| c * tmp[clamp(i as isize + k, h) * w + j]).sum();
        }
    }
    out
}

/// `true` where every pixel within Chebyshev distance `r` is valid.
fn erode(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    let run = |get: &dyn Fn(usize) -> bool, n: usize| -> Vec<bool> {
        let mut prefix = vec![0usize; n + 1];
        for k in 0..n {
            prefix[k + 1] = prefix[k] + usize::from(!get(k));
        }
        (0..n).map(|k| prefix[(k + r + 1).min(n)] == prefix[k.saturating_sub(r)]).collect()
    };
    let mut rows = vec![false; h * w];
    for i in 0..h {
        let line = run(&|j| mask[i * w + j], w);
        rows[i * w..(i + 1) * w].copy_from_slice(&line);
    }
    let mut out = vec![false; h * w];
    for j in 0..w {
        let col = run(&|i| rows[i * w + j], h);
        for i in 0..h {
            out[i * w + j] = col[i];
        }
    }
    out
}

fn normalize_into(block: &mut [f64], gain: f64) {
    let n = block.len() as f64;
    let mean = block.iter().sum::<f64>() / n;
    block.iter_mut().for_each(|v| *v -= mean);
    let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 {
        block.iter_mut().for_each(|v| *v *= gain / norm);
    } else {
        block.fill(0.0);
    }
}

/// Mean/variance-normalized patches from `pyramid_levels` progressively
/// blurred copies of `image`, scaled so that the correlation of two features
/// is `match_temperature` times their mean normalized cross-correlation.
pub fn match_features(image: &ScalarField, cfg: &FeatureConfig, scale: u32) -> Result<FeatureMap, WhvsError> {
    cfg.validate()?;
    let (h, w) = (image.grid.ny, image.grid.nx);
    let filled = image.filled(0.0);
    let levels: Vec<Vec<f64>> = (0..cfg.pyramid_levels).map(|l| blur(&filled, h, w, level_sigma(l))).collect();
    let r = cfg.patch_radius as isize;
    let block = (2 * cfg.patch_radius + 1).pow(2);
    let dim = cfg.match_channels();
    let gain = (cfg.match_temperature * (dim as f64).sqrt() / cfg.pyramid_levels as f64).sqrt();
    let mut values = vec![0.0; h * w * dim];
    values.par_chunks_mut(w * dim).enumerate().for_each(|(i, row)| {
        for j in 0..w {
            let f = &mut row[j * dim..(j + 1) * dim];
            for (l, img) in levels.iter().enumerate() {
                let step = 1isize << l;
                let out = &mut f[l * block..(l + 1) * block];
                let mut k = 0;
                for dy in -r..=r {
                    let y = clamp(i as isize + dy * step, h);
                    for dx in -r..=r {
                        out[k] = img[y * w + clamp(j as isize + dx * step, w)];
                        k += 1;
                    }
                }
                normalize_into(out, gain);
            }
        }
    });
    let map = FeatureMap::new(Tensor3::from_vec(h, w, dim, values)?, scale)?;
    match &image.mask {
        None => Ok(map),
        Some(mask) => map.with_mask(erode(mask, h, w, cfg.match_support())),
    }
}

/// Unit-normalized differences to the 8 neighbours at `reference_dilation`,
/// scaled so a feature's self-similarity logit is `attention_temperature`.
pub fn reference_features(image: &ScalarField, cfg: &FeatureConfig, scale: u32) -> Result<FeatureMap, WhvsError> {
    cfg.validate()?;
    let (h, w) = (image.grid.ny, image.grid.nx);
    let img = image.filled(0.0);
    let s = cfg.reference_dilation as isize;
    let gain = (cfg.attention_temperature * 8f64.sqrt()).sqrt();
    let mut values = vec![0.0; h * w * 8];
    for i in 0..h {
        for j in 0..w {
            let f = &mut values[(i * w + j) * 8..(i * w + j + 1) * 8];
            let centre = img[i * w + j];
            let mut k = 0;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    f[k] = img[clamp(i as isize + dy * s, h) * w + clamp(j as isize + dx * s, w)] - centre;
                    k += 1;
                }
            }
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                f.iter_mut().for_each(|v| *v *= gain / norm);
            } else {
                f.fill(0.0);
            }
        }
    }
    let map = FeatureMap::new(Tensor3::from_vec(h, w, 8, values)?, scale)?;
    match &image.mask {
        None => Ok(map),
        Some(mask) => map.with_mask(erode(mask, h, w, cfg.reference_dilation)),
    }
}

/// Halves the resolution by 2x2 averaging; a coarse pixel is valid when all
/// four fine pixels are.
pub fn downsample(image: &ScalarField) -> Result<ScalarField, WhvsError> {
    let (h, w) = (image.grid.ny, image.grid.nx);
    let (h2, w2) = (h / 2, w / 2);
    let grid = Grid2D::pixels(w2, h2)?;
    let mut values = vec![0.0; h2 * w2];
    let mut mask = vec![true; h2 * w2];
    for i in 0..h2 {
        for j in 0..w2 {
            let idx = [(2 * i) * w + 2 * j, (2 * i) * w + 2 * j + 1, (2 * i + 1) * w + 2 * j, (2 * i + 1) * w + 2 * j + 1];
            values[i * w2 + j] = idx.iter().map(|&k| image.values[k]).sum::<f64>() / 4.0;
            mask[i * w2 + j] = idx.iter().all(|&k| image.is_valid(k));
        }
    }
    Ok(ScalarField { grid, values, mask: None }.with_mask(mask)?)
}

/// Bilinear upsampling of a disparity map by two, values doubled. Coarse
/// pixel `c` covers fine pixels `2c` and `2c + 1`. Invalid coarse pixels are
/// left out of the interpolation.
pub fn upsample_disparity(coarse: &DisparityMap, h: usize, w: usize) -> DisparityMap {
    let coord = |fine: usize, n: usize| ((fine as f64 - 0.5) / 2.0).clamp(0.0, (n - 1) as f64);
    let mut values = vec![0.0; h * w];
    let mut mask = vec![false; h * w];
    for i in 0..h {
        let y = coord(i, coarse.h);
        let y0 = (y.floor() as usize).min(coarse.h.saturating_sub(2));
        let ty = y - y0 as f64;
        for j in 0..w {
            let x = coord(j, coarse.w);
            let x0 = (x.floor() as usize).min(coarse.w.saturating_sub(2));
            let tx = x - x0 as f64;
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (dy, wy) in [(0, 1.0 - ty), (1, ty)] {
                for (dx, wx) in [(0, 1.0 - tx), (1, tx)] {
                    let (yy, xx) = (y0 + dy, x0 + dx);
                    if yy >= coarse.h || xx >= coarse.w {
                        continue;
                    }
                    let k = yy * coarse.w + xx;
                    let wt = wx * wy;
                    if wt > 0.0 && coarse.is_valid(k) {
                        acc += wt * coarse.values[k];
                        wsum += wt;
                    }
                }
            }
            if wsum > 0.0 {
                values[i * w + j] = 2.0 * acc / wsum;
                mask[i * w + j] = true;
            }
        }
    }
    DisparityMap { h, w, values, mask: None }.with_mask(mask).expect("mask sized to map")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::band_limited_texture;

    #[test]
    fn self_correlation_is_the_temperature() {
        let img = band_limited_texture(32, 24, 1.2, 5).unwrap();
        let cfg = FeatureConfig::default();
        let f = match_features(&img, &cfg, 0).unwrap();
        assert_eq!(f.dims(), (24, 32, 75));
        let v = f.tensor.vector(10, 11);
        let self_corr = v.iter().map(|x| x * x).sum::<f64>() / 75f64.sqrt();
        assert!((self_corr - cfg.match_temperature).abs() < 1e-9);
        let r = reference_features(&img, &cfg, 0).unwrap();
        let v = r.tensor.vector(3, 4);
        assert!((v.iter().map(|x| x * x).sum::<f64>() / 8f64.sqrt() - cfg.attention_temperature).abs() < 1e-9);
    }

    #[test]
    fn features_ignore_brightness_and_contrast() {
        let img = band_limited_texture(16, 16, 1.0, 2).unwrap();
        let mut other = img.clone();
        other.values.iter_mut().for_each(|v| *v = 3.0 * *v + 7.0);
        let cfg = FeatureConfig::default();
        let a = match_features(&img, &cfg, 0).unwrap();
        let b = match_features(&other, &cfg, 0).unwrap();
        for (x, y) in a.tensor.values.iter().zip(&b.tensor.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_pixels_spread_over_the_support() {
        let g = Grid2D::pixels(40, 40).unwrap();
        let mut mask = vec![true; g.len()];
        mask[10 * 40 + 39] = false;
        let img = ScalarField::from_fn(g, |x, y| (0.7 * x).sin() + (0.3 * y).cos()).with_mask(mask).unwrap();
        let cfg = FeatureConfig::default();
        let f = match_features(&img, &cfg, 0).unwrap();
        let support = cfg.match_support();
        assert!(!f.is_valid(10, 39 - support));
        assert!(f.is_valid(10, 38 - support));
        assert!(f.is_valid(10 + support + 1, 39));
    }

    #[test]
    fn downsample_then_upsample_preserves_linear_disparity() {
        let g = Grid2D::pixels(16, 12).unwrap();
        let img = ScalarField::from_fn(g, |x, y| x + 2.0 * y);
        let half = downsample(&img).unwrap();
        assert_eq!((half.grid.nx, half.grid.ny), (8, 6));
        assert!((half.at(1, 2) - (2.5 + 2.0 * 4.5)).abs() < 1e-12);
        let coarse = DisparityMap::new(6, 8, half.values.clone()).unwrap();
        let up = upsample_disparity(&coarse, 12, 16);
        // interior fine pixels recover twice the linear function
        for i in 1..11 {
            for j in 1..15 {
                assert!((up.at(i, j) - 2.0 * (j as f64 + 2.0 * i as f64)).abs() < 1e-9);
            }
        }
    }
}
