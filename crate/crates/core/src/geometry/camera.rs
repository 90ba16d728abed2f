use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::field::{Grid2D, ScalarField};

/// Disparities at or below this many pixels are treated as invalid.
pub const D_MIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidRig(format!("focal lengths must be positive, got {} {}", self.fx, self.fy)));
        }
        if !(self.cx >= 0.0 && self.cx <= self.width as f64 && self.cy >= 0.0 && self.cy <= self.height as f64) {
            return Err(GeometryError::InvalidRig(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Rectified stereo pair; `r`, `t` map left-camera to right-camera coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StereoRig {
    pub left: CameraIntrinsics,
    pub right: CameraIntrinsics,
    /// Row-major rotation.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    #[serde(rename = "T")]
    pub t: [f64; 3],
    /// m
    pub baseline: f64,
}

impl StereoRig {
    /// Ideal rectified rig: identical cameras displaced along +X by `baseline`.
    pub fn rectified(camera: CameraIntrinsics, baseline: f64) -> Self {
        Self {
            left: camera.clone(),
            right: camera,
            r: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            t: [-baseline, 0.0, 0.0],
            baseline,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.left.validate()?;
        self.right.validate()?;
        let r = &self.r;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[3 * k + i] * r[3 * k + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-10 {
                    return Err(GeometryError::InvalidRig("R is not orthonormal".into()));
                }
            }
        }
        let norm = self.t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(self.baseline > 0.0) || (norm - self.baseline).abs() > 1e-9 * self.baseline.max(1.0) {
            return Err(GeometryError::InvalidRig(format!("baseline {} must equal |T| = {norm} > 0", self.baseline)));
        }
        Ok(())
    }
}

/// Camera-frame points laid out like the disparity map they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub grid: Grid2D,
    pub points: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl PointCloud {
    pub fn valid_points(&self) -> Vec<[f64; 3]> {
        self.points.iter().zip(&self.valid).filter(|(_, &v)| v).map(|(p, _)| *p).collect()
    }
}

/// Pinhole triangulation of a left-image disparity map. Pixel coordinates are
/// the disparity grid's node coordinates, so a crop is expressed by the grid
/// origin.
pub fn triangulate(disparity: &ScalarField, rig: &StereoRig) -> Result<PointCloud, GeometryError> {
    rig.validate()?;
    let g = disparity.grid;
    let c = &rig.left;
    let mut points = vec![[f64::NAN; 3]; g.len()];
    let mut valid = vec![false; g.len()];
    for j in 0..g.ny {
        let v = g.y(j);
        for i in 0..g.nx {
            let idx = g.index(i, j);
            let d = disparity.values[idx];
            if !disparity.is_valid(idx) || !d.is_finite() || d <= D_MIN {
                continue;
            }
            let z = c.fx * rig.baseline / d;
            points[idx] = [(g.x(i) - c.cx) * z / c.fx, (v - c.cy) * z / c.fy, z];
            valid[idx] = true;
        }
    }
    Ok(PointCloud { grid: g, points, valid })
}

/// Left-image disparity induced by the plane through `point` with normal
/// `normal` (camera frame). Pixels whose ray misses the plane in front of the
/// camera are left invalid.
pub fn plane_disparity(rig: &StereoRig, grid: Grid2D, point: [f64; 3], normal: [f64; 3]) -> ScalarField {
    let c = &rig.left;
    let offset: f64 = (0..3).map(|k| normal[k] * point[k]).sum();
    let mut values = vec![0.0; grid.len()];
    let mut mask = vec![true; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.index(i, j);
            let ray = [(grid.x(i) - c.cx) / c.fx, (grid.y(j) - c.cy) / c.fy, 1.0];
            let denom: f64 = (0..3).map(|k| normal[k] * ray[k]).sum();
            let z = offset / denom;
            if denom != 0.0 && z > 0.0 {
                values[idx] = c.fx * rig.baseline / z;
            } else {
                mask[idx] = false;
            }
        }
    }
    ScalarField { grid, values, mask: None }.with_mask(mask).expect("mask matches grid")
}

/// Pixel window of the left image that is reconstructed, half-open.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionRegion {
    pub u0: usize,
    pub u1: usize,
    pub v0: usize,
    pub v1: usize,
}

impl ReconstructionRegion {
    /// Window used for the field recordings: `u in [412, 2044)`, `v in [389, 1669)`.
    pub const FIELD: Self = Self { u0: 412, u1: 2044, v0: 389, v1: 1669 };

    pub fn width(&self) -> usize {
        self.u1 - self.u0
    }

    pub fn height(&self) -> usize {
        self.v1 - self.v0
    }

    pub fn n_points(&self) -> usize {
        self.width() * self.height()
    }

    /// Pixel grid of the window in full-image coordinates.
    pub fn grid(&self) -> Result<Grid2D, GeometryError> {
        Ok(Grid2D::new(self.width(), self.height(), 1.0, 1.0, self.u0 as f64, self.v0 as f64)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics { fx: 1000.0, fy: 1000.0, cx: 1224.0, cy: 1024.0, width: 2448, height: 2048 }
    }

    #[test]
    fn pinhole_depth() {
        let rig = StereoRig::rectified(camera(), 2.03);
        let g = Grid2D::new(2, 2, 1.0, 1.0, 1224.0, 1024.0).unwrap();
        let cloud = triangulate(&ScalarField::constant(g, 100.0), &rig).unwrap();
        assert!((cloud.points[0][2] - 20.3).abs() < 1e-12);
        assert_eq!(cloud.points[0][0], 0.0);
        let doubled = triangulate(&ScalarField::constant(g, 200.0), &rig).unwrap();
        assert_eq!(doubled.points[3][2] * 2.0, cloud.points[3][2]);
    }

    #[test]
    fn tiny_or_masked_disparity_is_invalid() {
        let rig = StereoRig::rectified(camera(), 1.0);
        let g = Grid2D::pixels(2, 2).unwrap();
        let d = ScalarField::new(g, vec![1e-4, 5.0, 5.0, 0.0]).unwrap().with_mask(vec![true, true, false, true]).unwrap();
        let cloud = triangulate(&d, &rig).unwrap();
        assert_eq!(cloud.valid, vec![false, true, false, false]);
        assert_eq!(cloud.valid_points().len(), 1);
    }

    #[test]
    fn rig_validation() {
        let mut rig = StereoRig::rectified(camera(), 1.5);
        assert!(rig.validate().is_ok());
        rig.baseline = 2.0;
        assert!(rig.validate().is_err());
        let mut rig = StereoRig::rectified(camera(), 1.5);
        rig.r[0] = 1.1;
        assert!(rig.validate().is_err());
        let mut rig = StereoRig::rectified(camera(), 1.5);
        rig.left.cx = -3.0;
        assert!(rig.validate().is_err());
    }

    #[test]
    fn field_region_has_two_million_points() {
        let r = ReconstructionRegion::FIELD;
        assert_eq!((r.width(), r.height()), (1632, 1280));
        assert_eq!(r.n_points(), 2_088_960);
        let g = r.grid().unwrap();
        assert_eq!((g.x(0), g.y(0)), (412.0, 389.0));
    }
}
