use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OcclusionError;
use crate::field::ScalarField;
use crate::rng::substream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcclusionKind {
    /// One contiguous blob.
    Localized,
    /// Square speckles scattered over the image.
    Distributed,
    /// Leftmost columns, as when the two frustums only partly overlap.
    FovCrop,
}

impl OcclusionKind {
    pub const ALL: [OcclusionKind; 3] = [Self::Localized, Self::Distributed, Self::FovCrop];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Localized => "localized",
            Self::Distributed => "distributed",
            Self::FovCrop => "fov_crop",
        }
    }
}

impl std::str::FromStr for OcclusionKind {
    type Err = OcclusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| OcclusionError::InvalidSpec(format!("unknown occlusion kind {s:?}")))
    }
}

fn default_block() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionSpec {
    pub kind: OcclusionKind,
    /// Occluded fraction of the image.
    pub ratio: f64,
    #[serde(default)]
    pub seed: u64,
    /// Speckle edge for `distributed`, px.
    #[serde(default = "default_block")]
    pub block_px: usize,
}

impl OcclusionSpec {
    pub fn new(kind: OcclusionKind, ratio: f64, seed: u64) -> Self {
        Self { kind, ratio, seed, block_px: default_block() }
    }

    pub fn validate(&self) -> Result<(), OcclusionError> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(OcclusionError::InvalidSpec(format!("ratio must lie in [0, 1], got {}", self.ratio)));
        }
        if self.block_px == 0 {
            return Err(OcclusionError::InvalidSpec("block_px must be >= 1".into()));
        }
        Ok(())
    }
}

/// Row-major validity over a `width x height` image; `false` is occluded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OcclusionMask {
    pub width: usize,
    pub height: usize,
    pub valid: Vec<bool>,
}

impl OcclusionMask {
    pub fn occluded_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    pub fn achieved_ratio(&self) -> f64 {
        self.occluded_count() as f64 / self.valid.len() as f64
    }

    /// `image` with occluded pixels marked invalid. An empty mask returns the
    /// image untouched.
    pub fn apply(&self, image: &ScalarField) -> Result<ScalarField, OcclusionError> {
        if image.grid.nx != self.width || image.grid.ny != self.height {
            return Err(OcclusionError::InvalidSpec(format!(
                "mask is {}x{}, image is {}x{}",
                self.width, self.height, image.grid.nx, image.grid.ny
            )));
        }
        if self.occluded_count() == 0 {
            return Ok(image.clone());
        }
        let mask: Vec<bool> = (0..self.valid.len()).map(|k| self.valid[k] && image.is_valid(k)).collect();
        Ok(image.clone().with_mask(mask)?)
    }
}

/// Seeded occlusion mask of `width x height` pixels.
///
/// `localized` occludes `round(ratio * n)` pixels exactly: a rectangle of
/// roughly the image aspect ratio plus one partial row. `distributed` draws
/// `block_px` squares from a shuffled block grid until the count is within
/// half a block of the target. `fov_crop` removes `round(ratio * width)`
/// whole columns on the left.
pub fn make_mask(spec: &OcclusionSpec, width: usize, height: usize) -> Result<OcclusionMask, OcclusionError> {
    spec.validate()?;
    if width == 0 || height == 0 {
        return Err(OcclusionError::InvalidSpec(format!("image dims must be positive, got {width}x{height}")));
    }
    let n = width * height;
    let mut valid = vec![true; n];
    match spec.kind {
        OcclusionKind::Localized => {
            let target = (spec.ratio * n as f64).round() as usize;
            if target > 0 {
                let mut rw = ((target as f64 * width as f64 / height as f64).sqrt().ceil() as usize).clamp(1, width);
                while (target / rw + usize::from(target % rw > 0)) > height {
                    rw += 1;
                }
                let (rows, rem) = (target / rw, target % rw);
                let rh = rows + usize::from(rem > 0);
                let mut rng = substream(spec.seed, "occlusion-localized");
                let x0 = rng.random_range(0..=width - rw);
                let y0 = rng.random_range(0..=height - rh);
                for r in 0..rh {
                    let cols = if r < rows { rw } else { rem };
                    let row = (y0 + r) * width + x0;
                    valid[row..row + cols].fill(false);
                }
            }
        }
        OcclusionKind::Distributed => {
            let target = spec.ratio * n as f64;
            let b = spec.block_px;
            let (nbx, nby) = (width.div_ceil(b), height.div_ceil(b));
            let mut cells: Vec<usize> = (0..nbx * nby).collect();
            cells.shuffle(&mut substream(spec.seed, "occlusion-distributed"));
            let half_block = (b * b) as f64 / 2.0;
            let mut count = 0usize;
            for cell in cells {
                let remaining = target - count as f64;
                if remaining < half_block && spec.ratio < 1.0 {
                    break;
                }
                let (bx, by) = (cell % nbx, cell / nbx);
                let (x0, y0) = (bx * b, by * b);
                let (x1, y1) = ((x0 + b).min(width), (y0 + b).min(height));
                let size = (x1 - x0) * (y1 - y0);
                if size as f64 > remaining + half_block && spec.ratio < 1.0 {
                    continue;
                }
                for y in y0..y1 {
                    valid[y * width + x0..y * width + x1].fill(false);
                }
                count += size;
            }
        }
        OcclusionKind::FovCrop => {
            let cols = (spec.ratio * width as f64).round() as usize;
            for row in valid.chunks_mut(width) {
                row[..cols].fill(false);
            }
        }
    }
    Ok(OcclusionMask { width, height, valid })
}
