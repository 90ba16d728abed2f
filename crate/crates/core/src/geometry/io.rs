//! Point-cloud files: little-endian f32 `X Y Z` triples (NaN for invalid
//! cells) plus a JSON sidecar next to them; rig files are plain JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GeometryError, PointCloud, StereoRig};
use crate::field::{FieldError, Grid2D};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudSidecar {
    pub count: usize,
    pub valid: usize,
    pub grid: Grid2D,
    pub frame: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_point_cloud(
    path: &Path,
    cloud: &PointCloud,
    frame: &str,
    meta: Option<serde_json::Value>,
) -> Result<(), GeometryError> {
    let mut bytes = Vec::with_capacity(cloud.points.len() * 12);
    for (p, &ok) in cloud.points.iter().zip(&cloud.valid) {
        for v in p {
            let v = if ok { *v as f32 } else { f32::NAN };
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(FieldError::from)?;
    let side = CloudSidecar {
        count: cloud.points.len(),
        valid: cloud.valid.iter().filter(|&&v| v).count(),
        grid: cloud.grid,
        frame: frame.to_string(),
        meta,
    };
    let json = serde_json::to_vec_pretty(&side).expect("sidecar serializes");
    fs::write(sidecar_path(path), json).map_err(FieldError::from)?;
    Ok(())
}

pub fn read_point_cloud(path: &Path) -> Result<(CloudSidecar, PointCloud), GeometryError> {
    let side_bytes = fs::read(sidecar_path(path)).map_err(FieldError::from)?;
    let side: CloudSidecar = serde_json::from_slice(&side_bytes)
        .map_err(|e| FieldError::Format { offset: 0, message: format!("malformed sidecar: {e}") })?;
    let bytes = fs::read(path).map_err(FieldError::from)?;
    if bytes.len() != side.count * 12 || side.count != side.grid.len() {
        return Err(FieldError::Format {
            offset: 0,
            message: format!("expected {} points, file holds {} bytes", side.count, bytes.len()),
        }
        .into());
    }
    let mut points = Vec::with_capacity(side.count);
    let mut valid = Vec::with_capacity(side.count);
    for c in bytes.chunks_exact(12) {
        let p: [f64; 3] = std::array::from_fn(|k| f64::from(f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap())));
        valid.push(p.iter().all(|v| v.is_finite()));
        points.push(p);
    }
    Ok((side.clone(), PointCloud { grid: side.grid, points, valid }))
}

pub fn read_rig(path: &Path) -> Result<StereoRig, GeometryError> {
    let bytes = fs::read(path).map_err(FieldError::from)?;
    let rig: StereoRig = serde_json::from_slice(&bytes)
        .map_err(|e| FieldError::Format { offset: 0, message: format!("malformed rig: {e}") })?;
    rig.validate()?;
    Ok(rig)
}
