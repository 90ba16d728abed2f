use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OcclusionError;
use crate::field::{Grid2D, ScalarField};
use crate::geometry::{CameraIntrinsics, StereoRig};
use crate::synth::{band_limited_texture, synth_stereo_pair, SeaStateSpec, StereoPair, WaveComponent, GRAVITY};

/// Rectified rig looking straight down at a random sea from `altitude`
/// metres. Camera `X`, `Y` coincide with the horizontal sea coordinates and
/// the water point under a ray sits at camera depth `altitude - eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NadirScene {
    pub camera: CameraIntrinsics,
    /// m
    pub baseline: f64,
    /// m
    pub altitude: f64,
    pub sea: SeaStateSpec,
    /// s
    pub time: f64,
    pub texture_sigma: f64,
    pub texture_seed: u64,
}

impl NadirScene {
    /// `width x height` images with a 90 degree horizontal field of view,
    /// 12 m altitude and a 0.8 m baseline.
    pub fn new(width: usize, height: usize, sea: SeaStateSpec) -> Self {
        let f = width as f64 / 2.0;
        let camera = CameraIntrinsics {
            fx: f,
            fy: f,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        };
        let texture_seed = sea.seed;
        Self { camera, baseline: 0.8, altitude: 12.0, sea, time: 0.0, texture_sigma: 1.0, texture_seed }
    }

    pub fn rig(&self) -> StereoRig {
        StereoRig::rectified(self.camera.clone(), self.baseline)
    }

    pub fn components(&self) -> Result<Vec<WaveComponent>, OcclusionError> {
        Ok(self.sea.components(GRAVITY)?)
    }

    fn eta(components: &[WaveComponent], x: f64, y: f64, t: f64) -> f64 {
        components.iter().map(|c| c.amplitude * c.phase_at(x, y, t).cos()).sum()
    }

    /// True left-image disparity. The ray depth solves `Z = H - eta(X(Z), Y(Z))`
    /// by fixed-point iteration, which contracts while the wave slope times the
    /// ray obliquity stays below one.
    pub fn disparity(&self) -> Result<ScalarField, OcclusionError> {
        let comps = self.components()?;
        let c = &self.camera;
        let grid = Grid2D::pixels(c.width, c.height)?;
        let h = self.altitude;
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (u, v) = ((idx % grid.nx) as f64, (idx / grid.nx) as f64);
                let (rx, ry) = ((u - c.cx) / c.fx, (v - c.cy) / c.fy);
                let mut z = h;
                for _ in 0..50 {
                    let next = h - Self::eta(&comps, rx * z, ry * z, self.time);
                    let done = (next - z).abs() < 1e-12 * h;
                    z = next;
                    if done {
                        break;
                    }
                }
                c.fx * self.baseline / z
            })
            .collect();
        Ok(ScalarField::new(grid, values)?)
    }

    pub fn pair(&self) -> Result<StereoPair, OcclusionError> {
        let tex = band_limited_texture(self.camera.width, self.camera.height, self.texture_sigma, self.texture_seed)?;
        Ok(synth_stereo_pair(&tex, &self.disparity()?)?)
    }

    /// Elevation sampled on a horizontal grid.
    pub fn eta_field(&self, grid: Grid2D) -> Result<ScalarField, OcclusionError> {
        let comps = self.components()?;
        Ok(ScalarField::from_fn(grid, |x, y| Self::eta(&comps, x, y, self.time)))
    }
}
