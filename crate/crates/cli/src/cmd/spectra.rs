//! Frequency spectrum, wave statistics and directional spectrum of an
//! elevation record.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use wavefield::spectra::{directional_spectrum, field_psd, wave_stats, DEFAULT_TAIL_RANGE};

use super::read_series;
use crate::config::{ensure, input_path, require_file, Params, Resolved};
use crate::error::CliError;
use crate::output::Run;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraParams {
    /// Elevation file; `eta.wfs` in the output directory by default.
    pub input: Option<PathBuf>,
    /// Welch segment length; the whole record by default.
    pub segment_len: Option<usize>,
    pub overlap: f64,
    /// Tail fit range in multiples of the peak frequency.
    pub tail_range: (f64, f64),
    pub directional: bool,
}

impl Default for SpectraParams {
    fn default() -> Self {
        Self { input: None, segment_len: None, overlap: 0.5, tail_range: DEFAULT_TAIL_RANGE, directional: true }
    }
}

impl Params for SpectraParams {
    fn validate(&self, out: &Path) -> Result<(), CliError> {
        ensure((0.0..1.0).contains(&self.overlap), "overlap", "overlap must lie in [0, 1)")?;
        let (lo, hi) = self.tail_range;
        ensure(lo > 0.0 && hi > lo, "tail_range", "tail range must satisfy 0 < lo < hi")?;
        if let Some(n) = self.segment_len {
            ensure(n >= 4, "segment_len", "segment_len must be at least 4")?;
        }
        require_file("input", &input_path(&self.input, out, "eta.wfs"))
    }
}

pub fn run(r: Resolved<SpectraParams>) -> Result<(), CliError> {
    let p = &r.params;
    let eta = read_series(&input_path(&p.input, &r.out, "eta.wfs"))?;
    let psd = field_psd(&eta, p.segment_len.unwrap_or(eta.len()), p.overlap)?;
    let stats = wave_stats(&psd, p.tail_range)?;
    let mut run = Run::create("spectra", r.seed, r.preset.clone(), r.hash.clone(), &r.out)?;
    run.write_text("psd.csv", &psd.to_csv())?;
    let mut results = json!({ "stats": stats, "df": psd.df });
    if p.directional {
        let dir = directional_spectrum(&eta)?;
        run.write_text("directional.csv", &dir.to_csv())?;
        let (theta, f) = dir.peak();
        results["directional_peak"] = json!({ "theta_deg": theta, "f": f, "dtheta": dir.dtheta });
    }
    run.finish(&r.params, results)
}
