//! Surface potential and velocities from an elevation record.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use wavefield::kinematics::{compute_kinematics, KinematicsConfig};

use super::{read_series, write_series, write_velocity};
use crate::config::{input_path, require_file, Params, Resolved};
use crate::error::CliError;
use crate::output::Run;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceVelParams {
    /// Elevation file; `eta.wfs` in the output directory by default.
    pub input: Option<PathBuf>,
    pub kinematics: KinematicsConfig,
}

impl Params for SurfaceVelParams {
    fn validate(&self, out: &Path) -> Result<(), CliError> {
        self.kinematics.validate().map_err(|e| CliError::config("kinematics", e.to_string()))?;
        require_file("input", &input_path(&self.input, out, "eta.wfs"))
    }
}

pub fn run(r: Resolved<SurfaceVelParams>) -> Result<(), CliError> {
    let eta = read_series(&input_path(&r.params.input, &r.out, "eta.wfs"))?;
    let kin = compute_kinematics(&eta, &r.params.kinematics)?;
    let mut run = Run::create("surface-vel", r.seed, r.preset.clone(), r.hash.clone(), &r.out)?;
    write_series(&mut run, "phi_s.wfs", "phi_s", &kin.phi_s, None)?;
    write_velocity(&mut run, "", &kin.velocity, eta.dt, eta.t0, None)?;
    let peak = kin
        .velocity
        .iter()
        .flat_map(|v| (0..v.grid.len()).filter(|&i| v.is_valid(i)).map(|i| v.ux[i].hypot(v.uy[i]).hypot(v.uz[i])))
        .fold(0.0f64, f64::max);
    run.finish(
        &r.params,
        json!({
            "frames": eta.len(),
            "first_valid_frame": 2,
            "iterations": kin.iterations,
            "max_speed": peak,
        }),
    )
}
