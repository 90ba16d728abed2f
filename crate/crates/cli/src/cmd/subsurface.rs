//! Potential fit of selected frames, velocities on a depth ladder and
//! streamlines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use wavefield::field::ScalarField;
use wavefield::potential::io::write_coefficients;
use wavefield::potential::{
    evaluate_laplacian, evaluate_on_grid, fit_coefficients, streamlines, FitOptions, PotentialBasis,
    PotentialCoefficients, StreamlineOptions,
};

use super::{read_series, read_velocity, to_vector_fields, COMPONENT_NAMES};
use crate::config::{ensure, input_path, require_file, Params, Resolved};
use crate::error::CliError;
use crate::output::Run;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamlineParams {
    /// Seeds along the grid diagonal at each ladder depth.
    pub seeds: usize,
    /// m; defaults to the grid spacing.
    pub step: Option<f64>,
    pub n_steps: usize,
}

impl Default for StreamlineParams {
    fn default() -> Self {
        Self { seeds: 8, step: None, n_steps: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsurfaceParams {
    /// Directory holding `eta.wfs` and `ux/uy/uz.wfs`; the output directory
    /// by default.
    pub input_dir: Option<PathBuf>,
    /// Frames to fit; the middle frame by default.
    pub frames: Option<Vec<usize>>,
    pub fit: FitOptions,
    /// Mode counts; `nx/4` and `ny/4` by default.
    pub n_max: Option<usize>,
    pub m_max: Option<usize>,
    /// Ladder depths, m (non-positive).
    pub depths: Vec<f64>,
    pub streamlines: StreamlineParams,
}

impl Default for SubsurfaceParams {
    fn default() -> Self {
        Self {
            input_dir: None,
            frames: None,
            fit: FitOptions::default(),
            n_max: None,
            m_max: None,
            depths: vec![-0.25, -0.5, -1.0],
            streamlines: StreamlineParams::default(),
        }
    }
}

impl Params for SubsurfaceParams {
    fn validate(&self, out: &Path) -> Result<(), CliError> {
        ensure(!self.depths.is_empty(), "depths", "depths must not be empty")?;
        ensure(self.depths.iter().all(|z| *z <= 0.0 && z.is_finite()), "depths", "depths must be <= 0")?;
        if let Some(l) = self.fit.lambda {
            ensure(l >= 0.0, "fit.lambda", "lambda must be >= 0")?;
        }
        ensure(self.fit.cg_tol > 0.0, "fit.cg_tol", "cg_tol must be positive")?;
        if let Some(f) = &self.frames {
            ensure(!f.is_empty(), "frames", "frames must not be empty")?;
        }
        if let Some(s) = self.streamlines.step {
            ensure(s > 0.0, "streamlines.step", "step must be positive")?;
        }
        let dir = self.input_dir.clone().unwrap_or_else(|| out.to_path_buf());
        for name in ["eta", "ux", "uy", "uz"] {
            require_file("input_dir", &dir.join(format!("{name}.wfs")))?;
        }
        Ok(())
    }
}

pub fn run(r: Resolved<SubsurfaceParams>) -> Result<(), CliError> {
    let p = &r.params;
    let dir = input_path(&p.input_dir, &r.out, "");
    let eta = read_series(&dir.join("eta.wfs"))?;
    let velocity = to_vector_fields(&read_velocity(&dir, "")?);
    if velocity.len() != eta.len() || velocity[0].grid != eta.grid {
        return Err(CliError::input("velocity and elevation records differ in shape"));
    }
    let frames = p.frames.clone().unwrap_or_else(|| vec![eta.len() / 2]);
    if let Some(&bad) = frames.iter().find(|&&f| f < 2 || f >= eta.len()) {
        return Err(CliError::config("frames", format!("frame {bad} outside the valid range 2..{}", eta.len())));
    }
    let g = eta.grid;
    let basis = match (p.n_max, p.m_max) {
        (None, None) => PotentialBasis::for_grid(&g)?,
        (n, m) => PotentialBasis::new(
            n.unwrap_or(g.nx / 4),
            m.unwrap_or(g.ny / 4),
            g.extent_x(),
            g.extent_y(),
            g.x0,
            g.y0,
        )?,
    };

    let mut fits = Vec::with_capacity(frames.len());
    for &f in &frames {
        fits.push(fit_coefficients(&velocity[f], &eta.frames[f], &basis, &p.fit)?);
    }
    let coeffs = PotentialCoefficients {
        basis: basis.clone(),
        dt: eta.dt,
        t0: eta.time(frames[0]),
        lambda: fits.iter().map(|f| f.lambda).collect(),
        frames: fits.iter().map(|f| f.coefficients.clone()).collect(),
    };

    let mut run = Run::create("subsurface", r.seed, r.preset.clone(), r.hash.clone(), &r.out)?;
    let ladder_meta = json!({ "frames": frames, "depths": p.depths });
    let path = run.path("coefficients.wpc");
    write_coefficients(&path, &coeffs, Some(merge(run.meta(), ladder_meta.clone())))?;
    run.note_written("coefficients.wpc");

    // ladder: frame-major, one file per component
    let mut ladder: [Vec<ScalarField>; 3] = Default::default();
    let mut max_laplacian = 0.0f64;
    let probes: Vec<[f64; 2]> = (0..g.ny).step_by(4).flat_map(|j| (0..g.nx).step_by(4).map(move |i| [g.x(i), g.y(j)])).collect();
    for t in 0..frames.len() {
        for &z in &p.depths {
            let v = evaluate_on_grid(&coeffs, g, z, t)?;
            for (c, l) in ladder.iter_mut().enumerate() {
                l.push(v.component_field(c));
            }
            let pts: Vec<[f64; 3]> = probes.iter().map(|q| [q[0], q[1], z]).collect();
            let lap = evaluate_laplacian(&coeffs, &pts, t)?;
            max_laplacian = lap.iter().fold(max_laplacian, |m, v| m.max(v.abs()));
        }
    }
    for (c, name) in COMPONENT_NAMES.iter().enumerate() {
        let refs: Vec<&ScalarField> = ladder[c].iter().collect();
        run.write_frames(&format!("ladder_{name}.wfs"), name, &refs, 1.0, 0.0, Some(ladder_meta.clone()))?;
    }

    let sp = &p.streamlines;
    let seeds: Vec<[f64; 3]> = p
        .depths
        .iter()
        .flat_map(|&z| {
            (0..sp.seeds).map(move |s| {
                let f = (s as f64 + 0.5) / sp.seeds as f64;
                [g.x0 + f * g.extent_x(), g.y0 + f * g.extent_y(), z]
            })
        })
        .collect();
    let options = StreamlineOptions {
        step: sp.step.unwrap_or(g.dx),
        n_steps: sp.n_steps,
        surface: Some(eta.frames[frames[0]].clone()),
        bounds: None,
    };
    let lines = streamlines(&coeffs, &seeds, 0, &options)?;
    let mut csv = String::from("line,step,x,y,z,stop\n");
    for (id, line) in lines.iter().enumerate() {
        let stop = serde_json::to_value(line.stop).expect("stop serializes");
        let stop = stop.as_str().unwrap_or_default();
        for (k, q) in line.points.iter().enumerate() {
            let _ = writeln!(csv, "{id},{k},{},{},{},{stop}", q[0], q[1], q[2]);
        }
    }
    run.write_text("streamlines.csv", &csv)?;

    let per_frame: Vec<_> = frames
        .iter()
        .zip(&fits)
        .map(|(f, fit)| {
            json!({
                "frame": f,
                "lambda": fit.lambda,
                "objective": fit.objective,
                "iterations": fit.iterations,
                "solver": fit.solver,
            })
        })
        .collect();
    run.finish(
        &r.params,
        json!({
            "modes": basis.len(),
            "fits": per_frame,
            "depths": p.depths,
            "max_laplacian": max_laplacian,
            "streamlines": lines.len(),
        }),
    )
}

fn merge(mut a: serde_json::Value, b: serde_json::Value) -> serde_json::Value {
    if let (Some(a), serde_json::Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}
