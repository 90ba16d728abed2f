//! Metrics of whatever a run directory holds: reconstructed against analytic
//! surface velocities, the subsurface ladder against linear theory and the
//! spectral statistics against the generator.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use wavefield::field::{ScalarFieldSeries, VectorField3};
use wavefield::spectra::field_errors;
use wavefield::synth::{analytic_subsurface_velocity, WaveComponent};

use super::{read_series, read_velocity, COMPONENT_NAMES};
use crate::config::{input_path, Params, Resolved};
use crate::error::CliError;
use crate::output::Run;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateParams {
    /// Run directory; the output directory by default.
    pub input_dir: Option<PathBuf>,
    /// Centre of the radial error profile in grid indices; the grid centre
    /// by default.
    pub centre: Option<(f64, f64)>,
}

impl Params for EvaluateParams {
    fn validate(&self, out: &Path) -> Result<(), CliError> {
        let dir = input_path(&self.input_dir, out, "");
        if dir.is_dir() {
            Ok(())
        } else {
            Err(CliError::config("input_dir", format!("{} is not a directory", dir.display())))
        }
    }
}

fn read_data(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(doc)
}

/// `||pred - truth|| / ||truth||` over cells valid in both.
fn relative_l2(pred: &[f64], truth: &[f64], valid: impl Fn(usize) -> bool) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..truth.len() {
        if valid(k) {
            num += (pred[k] - truth[k]).powi(2);
            den += truth[k] * truth[k];
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

fn surface_metrics(dir: &Path, centre: Option<(f64, f64)>) -> Result<Value, CliError> {
    let pred = read_velocity(dir, "")?;
    let truth = read_velocity(dir, "truth_")?;
    let mut out = Map::new();
    for c in 0..3 {
        let (p, t) = (&pred[c], &truth[c]);
        let g = t.grid;
        let centre = centre.unwrap_or(((g.nx as f64 - 1.0) / 2.0, (g.ny as f64 - 1.0) / 2.0));
        let errs = field_errors(p, t, centre)?;
        let rel: Vec<f64> = p
            .frames
            .iter()
            .zip(&t.frames)
            .filter(|(pf, _)| pf.valid_count() > 0)
            .map(|(pf, tf)| relative_l2(&pf.values, &tf.values, |k| pf.is_valid(k) && tf.is_valid(k)))
            .collect();
        let mean_rel = rel.iter().sum::<f64>() / rel.len().max(1) as f64;
        out.insert(
            COMPONENT_NAMES[c].into(),
            json!({ "r2": errs.r2, "rmse": errs.rmse, "nrmse": errs.nrmse, "relative_l2": mean_rel, "frames": rel.len() }),
        );
    }
    Ok(Value::Object(out))
}

fn subsurface_metrics(dir: &Path, comps: &[WaveComponent], eta: &ScalarFieldSeries) -> Result<Value, CliError> {
    let ladder = read_velocity(dir, "ladder_")?;
    let summary = read_data(&dir.join("subsurface.json"))?;
    let frames: Vec<usize> = serde_json::from_value(summary["results"]["fits"].clone())
        .ok()
        .map(|fits: Vec<Value>| fits.iter().filter_map(|f| f["frame"].as_u64().map(|v| v as usize)).collect())
        .unwrap_or_default();
    let depths: Vec<f64> = serde_json::from_value(summary["results"]["depths"].clone())
        .map_err(|_| CliError::input("subsurface.json lacks the ladder depths"))?;
    if ladder[0].len() != frames.len() * depths.len() {
        return Err(CliError::input("ladder files do not match subsurface.json"));
    }
    let g = ladder[0].grid;
    let mut rows = Vec::new();
    for (fi, &frame) in frames.iter().enumerate() {
        let t = eta.time(frame);
        for (di, &z) in depths.iter().enumerate() {
            let k = fi * depths.len() + di;
            let pts: Vec<[f64; 3]> = (0..g.len()).map(|i| [g.x(i % g.nx), g.y(i / g.nx), z]).collect();
            let truth = analytic_subsurface_velocity(comps, &pts, t)?;
            let pred = VectorField3 {
                grid: g,
                ux: ladder[0].frames[k].values.clone(),
                uy: ladder[1].frames[k].values.clone(),
                uz: ladder[2].frames[k].values.clone(),
                mask: None,
            };
            let mag = |u: [f64; 3]| (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            let n = g.len() as f64;
            let pred_mag = (0..g.len()).map(|i| mag([pred.ux[i], pred.uy[i], pred.uz[i]])).sum::<f64>() / n;
            let truth_mag = truth.iter().map(|u| mag(*u)).sum::<f64>() / n;
            let mut per = Map::new();
            for c in 0..3 {
                let tc: Vec<f64> = truth.iter().map(|u| u[c]).collect();
                per.insert(COMPONENT_NAMES[c].into(), json!(relative_l2(pred.component(c), &tc, |_| true)));
            }
            rows.push(json!({
                "frame": frame,
                "z": z,
                "mean_speed": pred_mag,
                "mean_speed_truth": truth_mag,
                "speed_ratio": pred_mag / truth_mag,
                "relative_l2": per,
            }));
        }
    }
    Ok(Value::Array(rows))
}

fn spectral_metrics(dir: &Path, comps: &[WaveComponent]) -> Result<Value, CliError> {
    let summary = read_data(&dir.join("spectra.json"))?;
    let stats = &summary["results"]["stats"];
    let hs = stats["hs"].as_f64().ok_or_else(|| CliError::input("spectra.json lacks hs"))?;
    let m0: f64 = comps.iter().map(|c| c.amplitude * c.amplitude / 2.0).sum();
    let hs_gen = 4.0 * m0.sqrt();
    Ok(json!({
        "hs": hs,
        "hs_generator": hs_gen,
        "hs_relative_error": (hs - hs_gen).abs() / hs_gen,
        "fp": stats["fp"],
        "tail_slope": stats["tail_slope"],
    }))
}

pub fn run(r: Resolved<EvaluateParams>) -> Result<(), CliError> {
    let dir = input_path(&r.params.input_dir, &r.out, "");
    let exists = |name: &str| dir.join(name).is_file();
    let comps: Option<Vec<WaveComponent>> = if exists("components.json") {
        let doc = read_data(&dir.join("components.json"))?;
        Some(serde_json::from_value(doc["data"].clone()).map_err(|e| CliError::input(format!("components.json: {e}")))?)
    } else {
        None
    };
    let mut metrics = Map::new();
    if ["ux.wfs", "truth_ux.wfs"].iter().all(|n| exists(n)) {
        metrics.insert("surface_velocity".into(), surface_metrics(&dir, r.params.centre)?);
    }
    if let Some(comps) = &comps {
        if exists("ladder_ux.wfs") && exists("subsurface.json") && exists("eta.wfs") {
            let eta = read_series(&dir.join("eta.wfs"))?;
            metrics.insert("subsurface".into(), subsurface_metrics(&dir, comps, &eta)?);
        }
        if exists("spectra.json") {
            metrics.insert("spectra".into(), spectral_metrics(&dir, comps)?);
        }
    }
    if metrics.is_empty() {
        return Err(CliError::input(format!("nothing to evaluate in {}", dir.display())));
    }
    let mut run = Run::create("evaluate", r.seed, r.preset.clone(), r.hash.clone(), &r.out)?;
    let metrics = Value::Object(metrics);
    run.write_json("metrics.json", &metrics)?;
    run.finish(&r.params, json!({ "sections": metrics.as_object().map(|m| m.keys().cloned().collect::<Vec<_>>()) }))
}
