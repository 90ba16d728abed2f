//! Stereo pair to disparity, point cloud, mean water plane and gridded
//! elevation. Without input images a nadir sea scene is synthesized.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use wavefield::field::{read_frames, ScalarField};
use wavefield::geometry::io::{read_rig, sidecar_path, write_point_cloud};
use wavefield::geometry::{fit_plane, project_eta, to_global, triangulate, PlaneFitOptions, StereoRig};
use wavefield::occlusion::{footprint_grid, BlockMatcher, NadirScene};
use wavefield::spectra::disparity_errors;
use wavefield::synth::{preset, SeaStateSpec};
use wavefield::whvs::{DisparityEstimator, DisparityMap, PipelineConfig, WhvsPipeline};

use crate::config::{ensure, require_file, Params, Resolved, MONO_PRESET};
use crate::error::CliError;
use crate::output::Run;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Multi-scale correlation and attention pipeline.
    #[default]
    Whvs,
    /// Block-matching baseline.
    Block,
}

pub fn estimator(
    kind: EstimatorKind,
    pipeline: &PipelineConfig,
    block: &BlockMatcher,
) -> Result<Box<dyn DisparityEstimator + Sync>, CliError> {
    Ok(match kind {
        EstimatorKind::Whvs => Box::new(WhvsPipeline::new(pipeline.clone())?),
        EstimatorKind::Block => Box::new(block.clone()),
    })
}

/// Synthetic nadir scene geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    /// m
    pub altitude: f64,
    /// m
    pub baseline: f64,
    /// s
    pub time: f64,
    /// px
    pub texture_sigma: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self { width: 192, height: 128, altitude: 12.0, baseline: 0.8, time: 0.0, texture_sigma: 1.0 }
    }
}

impl SceneParams {
    pub fn validate(&self, key: &str) -> Result<(), CliError> {
        ensure(self.width >= 32 && self.height >= 32, key, "scene must be at least 32x32 px")?;
        ensure(self.altitude > 0.0, key, "altitude must be positive")?;
        ensure(self.baseline > 0.0, key, "baseline must be positive")?;
        ensure(self.texture_sigma > 0.0, key, "texture_sigma must be positive")
    }

    pub fn build(&self, sea: SeaStateSpec, texture_seed: u64) -> NadirScene {
        let mut s = NadirScene::new(self.width, self.height, sea);
        s.altitude = self.altitude;
        s.baseline = self.baseline;
        s.time = self.time;
        s.texture_sigma = self.texture_sigma;
        s.texture_seed = texture_seed;
        s
    }
}

/// Sea of the synthetic scene: the explicit spec, else the preset (A1 by
/// default), seeded by the run seed.
pub fn scene_sea(sea: &Option<SeaStateSpec>, preset_id: Option<&str>, seed: u64) -> Result<SeaStateSpec, CliError> {
    if let Some(s) = sea {
        return Ok(SeaStateSpec { seed, ..s.clone() });
    }
    match preset_id {
        Some(MONO_PRESET) => Err(CliError::config("preset", "stereo scenes need a sea-state preset")),
        id => Ok(preset(id.unwrap_or("A1"))?.sea_state(seed)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StereoParams {
    /// Single-frame WFS1 images and rig JSON; all three or none.
    pub left: Option<PathBuf>,
    pub right: Option<PathBuf>,
    pub rig: Option<PathBuf>,
    pub estimator: EstimatorKind,
    pub pipeline: PipelineConfig,
    pub block: BlockMatcher,
    pub plane: PlaneFitOptions,
    pub scene: SceneParams,
    pub sea: Option<SeaStateSpec>,
    /// Trimmed fraction of the footprint on each side of the elevation grid.
    pub border: f64,
}

impl Default for StereoParams {
    fn default() -> Self {
        Self {
            left: None,
            right: None,
            rig: None,
            estimator: EstimatorKind::default(),
            pipeline: PipelineConfig::default(),
            block: BlockMatcher::default(),
            plane: PlaneFitOptions { inlier_tol: 0.5, ..PlaneFitOptions::default() },
            scene: SceneParams::default(),
            sea: None,
            border: 0.1,
        }
    }
}

impl Params for StereoParams {
    fn validate(&self, _: &Path) -> Result<(), CliError> {
        let given = [&self.left, &self.right, &self.rig].iter().filter(|p| p.is_some()).count();
        ensure(given == 0 || given == 3, "left", "left, right and rig must be given together")?;
        for (key, p) in [("left", &self.left), ("right", &self.right), ("rig", &self.rig)] {
            if let Some(p) = p {
                require_file(key, p)?;
            }
        }
        ensure(self.plane.inlier_tol > 0.0, "plane.inlier_tol", "inlier_tol must be positive")?;
        ensure(self.plane.ransac_iters > 0, "plane.ransac_iters", "ransac_iters must be positive")?;
        ensure((0.0..0.5).contains(&self.border), "border", "border must lie in [0, 0.5)")?;
        if let Some(s) = &self.sea {
            s.validate().map_err(|e| CliError::config("sea", e.to_string()))?;
        }
        self.scene.validate("scene")
    }
}

fn read_image(path: &Path) -> Result<ScalarField, CliError> {
    let (_, mut frames) = read_frames(path)?;
    if frames.len() != 1 {
        return Err(CliError::input(format!("{} holds {} frames, expected one image", path.display(), frames.len())));
    }
    Ok(frames.remove(0))
}

pub fn run(r: Resolved<StereoParams>) -> Result<(), CliError> {
    let p = &r.params;
    let mut run = Run::create("stereo", r.seed, r.preset.clone(), r.hash.clone(), &r.out)?;
    let (left, right, rig, truth): (ScalarField, ScalarField, StereoRig, Option<ScalarField>) = match (&p.left, &p.right, &p.rig) {
        (Some(l), Some(rp), Some(g)) => (read_image(l)?, read_image(rp)?, read_rig(g)?, None),
        _ => {
            let scene = p.scene.build(scene_sea(&p.sea, r.preset.as_deref(), r.seed)?, r.seed);
            let pair = scene.pair()?;
            let truth = scene.disparity()?;
            run.write_frames("left.wfs", "image", &[&pair.left], 1.0, 0.0, None)?;
            run.write_frames("right.wfs", "image", &[&pair.right], 1.0, 0.0, None)?;
            run.write_frames("truth_disparity.wfs", "disparity", &[&truth], 1.0, 0.0, None)?;
            (pair.left, pair.right, scene.rig(), Some(truth))
        }
    };
    let est = estimator(p.estimator, &p.pipeline, &p.block)?;
    let map = est.estimate(&left, &right)?;
    let mut disparity = map.to_field()?;
    disparity.grid = left.grid;
    run.write_frames("disparity.wfs", "disparity", &[&disparity], 1.0, 0.0, None)?;

    let cloud = triangulate(&disparity, &rig)?;
    write_point_cloud(&run.path("cloud.xyz"), &cloud, "camera", Some(run.meta()))?;
    run.note_written("cloud.xyz");
    let side = sidecar_path(Path::new("cloud.xyz"));
    run.note_written(&side.to_string_lossy());
    let pts = cloud.valid_points();
    let pose = fit_plane(&pts, &p.plane)?;
    let global = to_global(&pts, &pose);
    let grid = footprint_grid(&global, &rig, p.border)?;
    let eta = project_eta(&global, grid);
    run.write_frames("eta_stereo.wfs", "eta", &[&eta], 1.0, 0.0, None)?;

    let mut results = json!({
        "rig": rig,
        "pose": pose,
        "valid_disparity": disparity.valid_count(),
        "points": pts.len(),
        "eta_grid": grid,
        "eta_valid": eta.valid_count(),
    });
    if let Some(truth) = truth {
        let gt = DisparityMap::from_field(&truth);
        let far = 0..(map.h / 4).max(1);
        results["disparity_errors"] = serde_json::to_value(disparity_errors(&[map], &[gt], far)?).expect("errors serialize");
    }
    run.finish(&r.params, results)
}
