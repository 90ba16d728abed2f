//! Wave fields and their analytic surface velocities.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use wavefield::field::{Grid2D, VectorField3};
use wavefield::synth::{analytic_surface_velocity, preset, synth_elevation, SeaStateSpec, WaveComponent, GRAVITY};

use super::{write_series, write_velocity};
use crate::config::{ensure, Params, Resolved, MONO_PRESET};
use crate::error::CliError;
use crate::output::Run;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonoWave {
    /// m
    pub amplitude: f64,
    /// rad/m
    pub wavenumber: f64,
    /// deg, counter-clockwise from +X
    #[serde(default)]
    pub direction_deg: f64,
}

impl MonoWave {
    /// The reference wave of the surface-velocity checks.
    pub fn reference() -> Self {
        Self { amplitude: 0.05, wavenumber: 1.0, direction_deg: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    /// Random sea; overrides the preset. Its seed is replaced by the run seed.
    pub sea: Option<SeaStateSpec>,
    pub monochromatic: Option<MonoWave>,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// m; defaults to an eighth of the peak wavelength (a sea) or four
    /// wavelengths across the grid (a single wave).
    pub dx: Option<f64>,
    /// s; defaults to the peak period over 32, or the period over 64.
    pub dt: Option<f64>,
    /// Also write the analytic surface velocities.
    pub velocity: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { sea: None, monochromatic: None, nx: 64, ny: 64, nt: 128, dx: None, dt: None, velocity: true }
    }
}

impl Params for SynthParams {
    fn validate(&self, _: &Path) -> Result<(), CliError> {
        ensure(self.nx >= 2, "nx", "nx must be at least 2")?;
        ensure(self.ny >= 2, "ny", "ny must be at least 2")?;
        ensure(self.nt >= 1, "nt", "nt must be at least 1")?;
        if let Some(dx) = self.dx {
            ensure(dx > 0.0 && dx.is_finite(), "dx", "dx must be positive")?;
        }
        if let Some(dt) = self.dt {
            ensure(dt > 0.0 && dt.is_finite(), "dt", "dt must be positive")?;
        }
        ensure(
            self.sea.is_none() || self.monochromatic.is_none(),
            "monochromatic",
            "set either sea or monochromatic, not both",
        )?;
        if let Some(s) = &self.sea {
            s.validate().map_err(|e| CliError::config("sea", e.to_string()))?;
        }
        if let Some(m) = &self.monochromatic {
            ensure(m.amplitude >= 0.0, "monochromatic.amplitude", "amplitude must be >= 0")?;
            ensure(m.wavenumber > 0.0, "monochromatic.wavenumber", "wavenumber must be positive")?;
        }
        Ok(())
    }
}

/// Wave source after preset resolution.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Mono(MonoWave),
    Sea(SeaStateSpec),
}

impl Source {
    pub fn resolve(params: &SynthParams, preset_id: Option<&str>, seed: u64) -> Result<Self, CliError> {
        if let Some(m) = &params.monochromatic {
            return Ok(Self::Mono(m.clone()));
        }
        if let Some(s) = &params.sea {
            return Ok(Self::Sea(SeaStateSpec { seed, ..s.clone() }));
        }
        match preset_id {
            Some(MONO_PRESET) => Ok(Self::Mono(MonoWave::reference())),
            id => Ok(Self::Sea(preset(id.unwrap_or("A1"))?.sea_state(seed))),
        }
    }

    pub fn components(&self) -> Result<Vec<WaveComponent>, CliError> {
        match self {
            Self::Mono(m) => Ok(vec![WaveComponent::deep_water(
                m.amplitude,
                m.wavenumber,
                m.direction_deg.to_radians(),
                0.0,
                GRAVITY,
            )]),
            Self::Sea(s) => Ok(s.components(GRAVITY)?),
        }
    }

    fn default_dx(&self, nx: usize) -> f64 {
        match self {
            Self::Mono(m) => 4.0 * 2.0 * PI / m.wavenumber / nx as f64,
            Self::Sea(s) => GRAVITY / (2.0 * PI * s.fp * s.fp) / 8.0,
        }
    }

    fn default_dt(&self) -> f64 {
        match self {
            Self::Mono(m) => 2.0 * PI / (GRAVITY * m.wavenumber).sqrt() / 64.0,
            Self::Sea(s) => 1.0 / s.fp / 32.0,
        }
    }
}

pub fn run(r: Resolved<SynthParams>) -> Result<(), CliError> {
    let p = &r.params;
    let source = Source::resolve(p, r.preset.as_deref(), r.seed)?;
    let comps = source.components()?;
    let dx = p.dx.unwrap_or_else(|| source.default_dx(p.nx));
    let dt = p.dt.unwrap_or_else(|| source.default_dt());
    let grid = Grid2D::new(p.nx, p.ny, dx, dx, 0.0, 0.0)?;
    let mut run = Run::create("synth", r.seed, r.preset.clone(), r.hash.clone(), &r.out)?;

    let eta = synth_elevation(&comps, grid, dt, p.nt)?;
    write_series(&mut run, "eta.wfs", "eta", &eta, None)?;
    if p.velocity {
        let velocity: Vec<VectorField3> =
            (0..p.nt).into_par_iter().map(|k| analytic_surface_velocity(&comps, grid, k as f64 * dt)).collect();
        write_velocity(&mut run, "truth_", &velocity, dt, 0.0, None)?;
    }
    run.write_json("components.json", &comps)?;

    let m0: f64 = comps.iter().map(|c| c.amplitude * c.amplitude / 2.0).sum();
    let source_json = match &source {
        Source::Mono(m) => json!({ "monochromatic": m }),
        Source::Sea(s) => json!({ "sea": s }),
    };
    run.finish(
        &r.params,
        json!({
            "source": source_json,
            "grid": grid,
            "dt": dt,
            "nt": p.nt,
            "components": comps.len(),
            "hs_generator": 4.0 * m0.sqrt(),
        }),
    )
}
