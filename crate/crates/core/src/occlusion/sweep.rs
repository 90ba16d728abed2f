use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_mask, OcclusionError, OcclusionSpec};
use crate::field::{Grid2D, ScalarField};
use crate::geometry::{fit_plane, project_eta, to_global, triangulate, PlaneFitOptions, StereoRig};
use crate::synth::StereoPair;
use crate::whvs::DisparityEstimator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub plane: PlaneFitOptions,
    /// Global-frame grid for the elevation maps; derived from the reference
    /// reconstruction when absent.
    pub grid: Option<Grid2D>,
    /// Fraction of the reference footprint trimmed from each side when the
    /// grid is derived.
    pub border: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            plane: PlaneFitOptions { inlier_tol: 0.5, ..PlaneFitOptions::default() },
            grid: None,
            border: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub specs: Vec<OcclusionSpec>,
    pub ratios: Vec<f64>,
    pub achieved_ratios: Vec<f64>,
    /// Mean absolute elevation difference to the reference, m.
    pub mean_error: Vec<f64>,
    pub per_pixel_error: Vec<ScalarField>,
    /// Unoccluded reconstruction every run is compared against.
    pub reference: ScalarField,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ratio,kind,seed,achieved_ratio,mean_error\n");
        for (k, spec) in self.specs.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.ratios[k],
                spec.kind.as_str(),
                spec.seed,
                self.achieved_ratios[k],
                self.mean_error[k]
            ));
        }
        out
    }
}

/// Stereo pair to gridded elevation: estimate, triangulate, fit the mean
/// plane, move to the global frame and grid onto `grid`.
pub fn reconstruct_eta<E: DisparityEstimator + ?Sized>(
    estimator: &E,
    left: &ScalarField,
    right: &ScalarField,
    rig: &StereoRig,
    plane: &PlaneFitOptions,
    grid: Grid2D,
) -> Result<ScalarField, OcclusionError> {
    let points = global_points(estimator, left, right, rig, plane)?;
    Ok(project_eta(&points, grid))
}

fn global_points<E: DisparityEstimator + ?Sized>(
    estimator: &E,
    left: &ScalarField,
    right: &ScalarField,
    rig: &StereoRig,
    plane: &PlaneFitOptions,
) -> Result<Vec<[f64; 3]>, OcclusionError> {
    let mut disparity = estimator.estimate(left, right)?.to_field()?;
    disparity.grid = left.grid;
    let cloud = triangulate(&disparity, rig)?;
    let pts = cloud.valid_points();
    let pose = fit_plane(&pts, plane)?;
    Ok(to_global(&pts, &pose))
}

/// Grid between the `border` and `1 - border` quantiles of the point
/// footprint, spacing two ground pixels.
pub fn footprint_grid(points: &[[f64; 3]], rig: &StereoRig, border: f64) -> Result<Grid2D, OcclusionError> {
    if points.is_empty() {
        return Err(OcclusionError::EmptyReference);
    }
    if !(0.0..0.5).contains(&border) {
        return Err(OcclusionError::InvalidSpec(format!("border must lie in [0, 0.5), got {border}")));
    }
    let quantiles = |k: usize| {
        let mut v: Vec<f64> = points.iter().map(|p| p[k]).collect();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        (at(border), at(1.0 - border))
    };
    let (x0, x1) = quantiles(0);
    let (y0, y1) = quantiles(1);
    let spacing = 2.0 * (x1 - x0) / ((1.0 - 2.0 * border) * rig.left.width as f64);
    if !(spacing > 0.0) {
        return Err(OcclusionError::EmptyReference);
    }
    let nx = ((x1 - x0) / spacing).floor() as usize + 1;
    let ny = ((y1 - y0) / spacing).floor() as usize + 1;
    Ok(Grid2D::new(nx.max(2), ny.max(2), spacing, spacing, x0, y0)?)
}

/// Runs every spec against the unoccluded reconstruction of `pair`.
///
/// Each mask is applied to both views. Cells valid in the reference but lost
/// under occlusion count as zero elevation, so missing surface contributes
/// its full amplitude to the error.
pub fn occluded_sweep<E: DisparityEstimator + Sync + ?Sized>(
    estimator: &E,
    pair: &StereoPair,
    rig: &StereoRig,
    specs: &[OcclusionSpec],
    options: &SweepOptions,
) -> Result<SweepResult, OcclusionError> {
    for s in specs {
        s.validate()?;
    }
    let ref_points = global_points(estimator, &pair.left, &pair.right, rig, &options.plane)?;
    let grid = match options.grid {
        Some(g) => g,
        None => footprint_grid(&ref_points, rig, options.border)?,
    };
    let reference = project_eta(&ref_points, grid);
    let n_ref = reference.valid_count();
    if n_ref == 0 {
        return Err(OcclusionError::EmptyReference);
    }
    let (w, h) = (pair.left.grid.nx, pair.left.grid.ny);
    let runs = specs
        .par_iter()
        .map(|spec| {
            let mask = make_mask(spec, w, h)?;
            let left = mask.apply(&pair.left)?;
            let right = mask.apply(&pair.right)?;
            let eta = reconstruct_eta(estimator, &left, &right, rig, &options.plane, grid)?;
            let values: Vec<f64> = (0..grid.len())
                .map(|k| {
                    if !reference.is_valid(k) {
                        return 0.0;
                    }
                    let occ = if eta.is_valid(k) { eta.values[k] } else { 0.0 };
                    (occ - reference.values[k]).abs()
                })
                .collect();
            let mean = values.iter().sum::<f64>() / n_ref as f64;
            let err = ScalarField::new(grid, values)?.with_mask(reference.mask_vec())?;
            Ok((mask.achieved_ratio(), mean, err))
        })
        .collect::<Result<Vec<_>, OcclusionError>>()?;
    let mut result = SweepResult {
        specs: specs.to_vec(),
        ratios: specs.iter().map(|s| s.ratio).collect(),
        achieved_ratios: Vec::with_capacity(runs.len()),
        mean_error: Vec::with_capacity(runs.len()),
        per_pixel_error: Vec::with_capacity(runs.len()),
        reference,
    };
    for (achieved, mean, err) in runs {
        result.achieved_ratios.push(achieved);
        result.mean_error.push(mean);
        result.per_pixel_error.push(err);
    }
    Ok(result)
}
