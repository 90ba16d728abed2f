pub mod evaluate;
pub mod occlude;
pub mod spectra;
pub mod stereo;
pub mod subsurface;
pub mod surface_vel;
pub mod synth;

use std::path::Path;

use serde_json::Value;

use wavefield::field::{read_field, ScalarField, ScalarFieldSeries, VectorField3};

use crate::error::CliError;
use crate::output::Run;

pub const COMPONENT_NAMES: [&str; 3] = ["ux", "uy", "uz"];

pub fn read_series(path: &Path) -> Result<ScalarFieldSeries, CliError> {
    Ok(read_field(path)?.1)
}

pub fn write_series(run: &mut Run, name: &str, kind: &str, s: &ScalarFieldSeries, extra: Option<Value>) -> Result<(), CliError> {
    let frames: Vec<&ScalarField> = s.frames.iter().collect();
    run.write_frames(name, kind, &frames, s.dt, s.t0, extra)
}

/// One file per velocity component, `<prefix>ux.wfs` and so on.
pub fn write_velocity(
    run: &mut Run,
    prefix: &str,
    velocity: &[VectorField3],
    dt: f64,
    t0: f64,
    extra: Option<Value>,
) -> Result<(), CliError> {
    for (c, name) in COMPONENT_NAMES.iter().enumerate() {
        let fields: Vec<ScalarField> = velocity.iter().map(|v| v.component_field(c)).collect();
        let refs: Vec<&ScalarField> = fields.iter().collect();
        run.write_frames(&format!("{prefix}{name}.wfs"), name, &refs, dt, t0, extra.clone())?;
    }
    Ok(())
}

/// Velocity series read back from three component files.
pub fn read_velocity(dir: &Path, prefix: &str) -> Result<[ScalarFieldSeries; 3], CliError> {
    let read = |name: &str| read_series(&dir.join(format!("{prefix}{name}.wfs")));
    Ok([read("ux")?, read("uy")?, read("uz")?])
}

pub fn to_vector_fields(components: &[ScalarFieldSeries; 3]) -> Vec<VectorField3> {
    let grid = components[0].grid;
    (0..components[0].len())
        .map(|k| {
            let [x, y, z] = components.each_ref().map(|s| &s.frames[k]);
            let mask = (x.mask.is_some() || y.mask.is_some() || z.mask.is_some())
                .then(|| (0..grid.len()).map(|i| x.is_valid(i) && y.is_valid(i) && z.is_valid(i)).collect());
            VectorField3 { grid, ux: x.values.clone(), uy: y.values.clone(), uz: z.values.clone(), mask }
        })
        .collect()
}
