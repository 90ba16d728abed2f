use serde::{Deserialize, Serialize};

use super::FieldError;

/// Uniform rectilinear grid. Node `(i, j)` sits at `(x0 + i*dx, y0 + j*dy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self, FieldError> {
        let grid = Self { nx, ny, dx, dy, x0, y0 };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with unit spacing anchored at the origin, i.e. pixel coordinates.
    pub fn pixels(width: usize, height: usize) -> Result<Self, FieldError> {
        Self::new(width, height, 1.0, 1.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.nx < 2 || self.ny < 2 {
            return Err(FieldError::InvalidGrid(format!(
                "grid must be at least 2x2, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.dx > 0.0 && self.dy > 0.0 && self.dx.is_finite() && self.dy.is_finite()) {
            return Err(FieldError::InvalidGrid(format!(
                "grid spacing must be positive, got dx={} dy={}",
                self.dx, self.dy
            )));
        }
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return Err(FieldError::InvalidGrid("grid origin must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    /// Periodic extent `nx*dx` along X.
    pub fn extent_x(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn extent_y(&self) -> f64 {
        self.ny as f64 * self.dy
    }
}

/// One scalar snapshot on a grid, row-major `[ny][nx]`, with an optional validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    /// `true` marks a valid cell. `None` means every cell is valid.
    pub mask: Option<Vec<bool>>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self, FieldError> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(FieldError::ShapeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values, mask: None })
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self, FieldError> {
        if mask.len() != self.grid.len() {
            return Err(FieldError::ShapeMismatch {
                expected: self.grid.len(),
                actual: mask.len(),
            });
        }
        self.mask = if mask.iter().all(|&m| m) { None } else { Some(mask) };
        Ok(self)
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.len()], mask: None }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()], mask: None }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        Self { grid, values, mask: None }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    pub fn valid_count(&self) -> usize {
        match &self.mask {
            None => self.values.len(),
            Some(m) => m.iter().filter(|&&v| v).count(),
        }
    }

    /// Mask as a dense vector, all-true when absent.
    pub fn mask_vec(&self) -> Vec<bool> {
        self.mask.clone().unwrap_or_else(|| vec![true; self.values.len()])
    }

    /// Values with invalid cells replaced by `fill`.
    pub fn filled(&self, fill: f64) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| if self.is_valid(k) { v } else { fill })
            .collect()
    }

    /// Bilinear sample at physical coordinates; `None` outside the grid or next to invalid cells.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let g = &self.grid;
        let fx = (x - g.x0) / g.dx;
        let fy = (y - g.y0) / g.dy;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (g.nx - 1) as f64 && fy <= (g.ny - 1) as f64) {
            return None;
        }
        let i0 = (fx.floor() as usize).min(g.nx - 2);
        let j0 = (fy.floor() as usize).min(g.ny - 2);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let mut acc = 0.0;
        for (dj, wy) in [(0, 1.0 - ty), (1, ty)] {
            for (di, wx) in [(0, 1.0 - tx), (1, tx)] {
                let idx = g.index(i0 + di, j0 + dj);
                let w = wx * wy;
                if w > 0.0 {
                    if !self.is_valid(idx) {
                        return None;
                    }
                    acc += w * self.values[idx];
                }
            }
        }
        Some(acc)
    }
}

/// Time-ordered sequence of fields on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFieldSeries {
    pub grid: Grid2D,
    pub dt: f64,
    pub t0: f64,
    pub frames: Vec<ScalarField>,
}

impl ScalarFieldSeries {
    pub const MIN_FRAMES: usize = 3;

    pub fn new(grid: Grid2D, dt: f64, t0: f64, frames: Vec<ScalarField>) -> Result<Self, FieldError> {
        grid.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FieldError::InvalidTimeStep(dt));
        }
        if frames.len() < Self::MIN_FRAMES {
            return Err(FieldError::TooFewFrames {
                required: Self::MIN_FRAMES,
                actual: frames.len(),
            });
        }
        if let Some(k) = frames.iter().position(|f| f.grid != grid) {
            return Err(FieldError::GridMismatch(format!("frame {k} grid differs from series grid")));
        }
        Ok(Self { grid, dt, t0, frames })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Time series at node `idx` across all frames.
    pub fn node_series(&self, idx: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.values[idx]).collect()
    }

    /// A node is valid for whole-record operations only if valid in every frame.
    pub fn node_valid(&self, idx: usize) -> bool {
        self.frames.iter().all(|f| f.is_valid(idx))
    }
}

/// Three-component velocity on a grid, m/s.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField3 {
    pub grid: Grid2D,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub uz: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl VectorField3 {
    pub fn zeros(grid: Grid2D) -> Self {
        let n = grid.len();
        Self { grid, ux: vec![0.0; n], uy: vec![0.0; n], uz: vec![0.0; n], mask: None }
    }

    pub fn invalid(grid: Grid2D) -> Self {
        let mut v = Self::zeros(grid);
        v.mask = Some(vec![false; grid.len()]);
        v
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    pub fn component(&self, c: usize) -> &[f64] {
        match c {
            0 => &self.ux,
            1 => &self.uy,
            _ => &self.uz,
        }
    }

    /// Component as a scalar field sharing this field's mask.
    pub fn component_field(&self, c: usize) -> ScalarField {
        ScalarField { grid: self.grid, values: self.component(c).to_vec(), mask: self.mask.clone() }
    }
}

/// Dense row-major `[h][w][d]` tensor, `d` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub h: usize,
    pub w: usize,
    pub d: usize,
    pub values: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(h: usize, w: usize, d: usize) -> Self {
        Self { h, w, d, values: vec![0.0; h * w * d] }
    }

    pub fn from_vec(h: usize, w: usize, d: usize, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != h * w * d {
            return Err(FieldError::ShapeMismatch { expected: h * w * d, actual: values.len() });
        }
        Ok(Self { h, w, d, values })
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.w + j) * self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j) + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j);
        self.values[o + k] = v;
    }

    /// The `d`-vector at `(i, j)`.
    #[inline]
    pub fn vector(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + self.d]
    }

    #[inline]
    pub fn vector_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        &mut self.values[o..o + self.d]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.d)
    }
}
