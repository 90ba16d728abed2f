//! Occlusion sweep over ratio and kind on synthetic nadir scenes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use wavefield::field::ScalarField;
use wavefield::occlusion::{occluded_sweep, BlockMatcher, OcclusionKind, OcclusionSpec, SweepOptions};
use wavefield::synth::SeaStateSpec;
use wavefield::whvs::PipelineConfig;

use super::stereo::{estimator, scene_sea, EstimatorKind, SceneParams};
use crate::config::{ensure, Params, Resolved};
use crate::error::CliError;
use crate::output::Run;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OccludeParams {
    pub estimator: EstimatorKind,
    pub pipeline: PipelineConfig,
    pub block: BlockMatcher,
    pub ratios: Vec<f64>,
    pub kinds: Vec<OcclusionKind>,
    /// Scenes per ratio; scene `s` uses seed `seed + s`.
    pub seeds: u64,
    pub block_px: usize,
    pub scene: SceneParams,
    pub sea: Option<SeaStateSpec>,
    pub sweep: SweepOptions,
}

impl Default for OccludeParams {
    fn default() -> Self {
        Self {
            estimator: EstimatorKind::Block,
            pipeline: PipelineConfig::default(),
            block: BlockMatcher::default(),
            ratios: vec![0.0, 0.05, 0.10, 0.15],
            kinds: OcclusionKind::ALL.to_vec(),
            seeds: 3,
            block_px: 8,
            scene: SceneParams::default(),
            sea: None,
            sweep: SweepOptions::default(),
        }
    }
}

impl Params for OccludeParams {
    fn validate(&self, _: &Path) -> Result<(), CliError> {
        ensure(!self.ratios.is_empty(), "ratios", "ratios must not be empty")?;
        ensure(self.ratios.iter().all(|r| (0.0..=1.0).contains(r)), "ratios", "ratios must lie in [0, 1]")?;
        ensure(!self.kinds.is_empty(), "kinds", "kinds must not be empty")?;
        ensure(self.seeds >= 1, "seeds", "seeds must be at least 1")?;
        ensure(self.block_px >= 1, "block_px", "block_px must be at least 1")?;
        if let Some(s) = &self.sea {
            s.validate().map_err(|e| CliError::config("sea", e.to_string()))?;
        }
        self.scene.validate("scene")
    }
}

pub fn run(r: Resolved<OccludeParams>) -> Result<(), CliError> {
    let p = &r.params;
    let est = estimator(p.estimator, &p.pipeline, &p.block)?;
    let mut run = Run::create("occlude", r.seed, r.preset.clone(), r.hash.clone(), &r.out)?;
    let mut csv = String::from("ratio,kind,seed,achieved_ratio,mean_error\n");
    // kind -> ratio index -> sum over seeds
    let mut sums: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in 0..p.seeds {
        let seed = r.seed.wrapping_add(s);
        let scene = p.scene.build(scene_sea(&p.sea, r.preset.as_deref(), seed)?, seed);
        let pair = scene.pair()?;
        let specs: Vec<OcclusionSpec> = p
            .kinds
            .iter()
            .flat_map(|&kind| p.ratios.iter().map(move |&ratio| OcclusionSpec { kind, ratio, seed, block_px: p.block_px }))
            .collect();
        let result = occluded_sweep(est.as_ref(), &pair, &scene.rig(), &specs, &p.sweep)?;
        csv.extend(result.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
        for (spec, e) in specs.iter().zip(&result.mean_error) {
            let row = sums.entry(spec.kind.as_str()).or_insert_with(|| vec![0.0; p.ratios.len()]);
            let i = p.ratios.iter().position(|r| *r == spec.ratio).expect("ratio from the list");
            row[i] += e;
        }
        let frames: Vec<&ScalarField> = result.per_pixel_error.iter().collect();
        let specs_json = serde_json::to_value(&specs).expect("specs serialize");
        run.write_frames(&format!("delta_eta_{s}.wfs"), "delta_eta", &frames, 1.0, 0.0, Some(json!({ "specs": specs_json })))?;
    }
    run.write_text("sweep.csv", &csv)?;
    let curves: BTreeMap<&str, Vec<f64>> =
        sums.into_iter().map(|(k, v)| (k, v.into_iter().map(|x| x / p.seeds as f64).collect())).collect();
    run.finish(&r.params, json!({ "ratios": p.ratios, "mean_error": curves }))
}
