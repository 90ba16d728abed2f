use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::field::{Grid2D, ScalarField, ScalarFieldSeries, VectorField3};

/// Standard gravity used throughout unless a config overrides it, m/s^2.
pub const GRAVITY: f64 = 9.81;

/// One linear deep-water wave `a cos(kx X + ky Y - w t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveComponent {
    #[serde(rename = "a")]
    pub amplitude: f64,
    pub kx: f64,
    pub ky: f64,
    pub omega: f64,
    pub phase: f64,
}

impl WaveComponent {
    /// Component travelling towards `direction` (radians, counter-clockwise from +X)
    /// with wavenumber magnitude `k`; `omega` follows from deep-water dispersion.
    pub fn deep_water(amplitude: f64, k: f64, direction: f64, phase: f64, gravity: f64) -> Self {
        Self {
            amplitude,
            kx: k * direction.cos(),
            ky: k * direction.sin(),
            omega: (gravity * k).sqrt(),
            phase,
        }
    }

    /// Component with frequency `f` (Hz).
    pub fn from_frequency(amplitude: f64, f: f64, direction: f64, phase: f64, gravity: f64) -> Self {
        let omega = 2.0 * std::f64::consts::PI * f;
        Self::deep_water(amplitude, omega * omega / gravity, direction, phase, gravity)
    }

    #[inline]
    pub fn wavenumber(&self) -> f64 {
        self.kx.hypot(self.ky)
    }

    pub fn check(&self, gravity: f64) -> Result<(), SynthError> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(SynthError::InvalidComponent(format!("amplitude must be >= 0, got {}", self.amplitude)));
        }
        let lhs = self.omega * self.omega;
        let rhs = gravity * self.wavenumber();
        let scale = lhs.abs().max(rhs.abs());
        if scale > 0.0 && (lhs - rhs).abs() > 1e-10 * scale {
            return Err(SynthError::DispersionViolation { omega: self.omega, k: self.wavenumber() });
        }
        Ok(())
    }

    #[inline]
    pub fn phase_at(&self, x: f64, y: f64, t: f64) -> f64 {
        self.kx * x + self.ky * y - self.omega * t + self.phase
    }
}

pub fn check_components(components: &[WaveComponent], gravity: f64) -> Result<(), SynthError> {
    components.iter().try_for_each(|c| c.check(gravity))
}

/// Per-component separable phase tables `e^{i kx X_i}` and `e^{i ky Y_j}`.
struct PhaseTables {
    ex: Vec<Complex64>,
    ey: Vec<Complex64>,
}

impl PhaseTables {
    fn new(c: &WaveComponent, grid: &Grid2D) -> Self {
        Self {
            ex: (0..grid.nx).map(|i| Complex64::from_polar(1.0, c.kx * grid.x(i))).collect(),
            ey: (0..grid.ny).map(|j| Complex64::from_polar(1.0, c.ky * grid.y(j))).collect(),
        }
    }
}

/// Linear superposition sampled on `grid` at `t = k*dt`, `k < nt`.
pub fn synth_elevation(
    components: &[WaveComponent],
    grid: Grid2D,
    dt: f64,
    nt: usize,
) -> Result<ScalarFieldSeries, SynthError> {
    check_components(components, GRAVITY)?;
    let tables: Vec<PhaseTables> = components.iter().map(|c| PhaseTables::new(c, &grid)).collect();
    let frames = (0..nt)
        .map(|k| {
            let t = k as f64 * dt;
            let mut values = vec![0.0; grid.len()];
            for (c, tab) in components.iter().zip(&tables) {
                if c.amplitude == 0.0 {
                    continue;
                }
                let rot = Complex64::from_polar(c.amplitude, c.phase - c.omega * t);
                for (j, ey) in tab.ey.iter().enumerate() {
                    let row = rot * ey;
                    let out = &mut values[j * grid.nx..(j + 1) * grid.nx];
                    for (v, ex) in out.iter_mut().zip(&tab.ex) {
                        *v += (row * ex).re;
                    }
                }
            }
            ScalarField { grid, values, mask: None }
        })
        .collect();
    Ok(ScalarFieldSeries::new(grid, dt, 0.0, frames)?)
}

/// Elevation record at a single point.
pub fn synth_point_series(components: &[WaveComponent], x: f64, y: f64, dt: f64, nt: usize) -> Vec<f64> {
    (0..nt)
        .map(|k| {
            let t = k as f64 * dt;
            components.iter().map(|c| c.amplitude * c.phase_at(x, y, t).cos()).sum()
        })
        .collect()
}

/// First-order orbital velocity at `z = 0`.
pub fn analytic_surface_velocity(components: &[WaveComponent], grid: Grid2D, t: f64) -> VectorField3 {
    let mut out = VectorField3::zeros(grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.index(i, j);
            let u = velocity_at(components, grid.x(i), grid.y(j), 0.0, t);
            out.ux[idx] = u[0];
            out.uy[idx] = u[1];
            out.uz[idx] = u[2];
        }
    }
    out
}

fn velocity_at(components: &[WaveComponent], x: f64, y: f64, z: f64, t: f64) -> [f64; 3] {
    let mut u = [0.0; 3];
    for c in components {
        let k = c.wavenumber();
        if k == 0.0 || c.amplitude == 0.0 {
            continue;
        }
        let th = c.phase_at(x, y, t);
        let mag = c.amplitude * c.omega * (k * z).exp();
        let (s, co) = th.sin_cos();
        u[0] += mag * co * c.kx / k;
        u[1] += mag * co * c.ky / k;
        u[2] += mag * s;
    }
    u
}

/// Linear-theory velocity below the surface, decaying as `e^{|k| Z}`.
pub fn analytic_subsurface_velocity(
    components: &[WaveComponent],
    points: &[[f64; 3]],
    t: f64,
) -> Result<Vec<[f64; 3]>, SynthError> {
    if let Some(p) = points.iter().find(|p| p[2] > 0.0) {
        return Err(SynthError::PositiveDepth(p[2]));
    }
    Ok(points.iter().map(|p| velocity_at(components, p[0], p[1], p[2], t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mono() -> WaveComponent {
        WaveComponent::deep_water(0.05, 1.0, 0.0, 0.0, GRAVITY)
    }

    #[test]
    fn dispersion_is_enforced() {
        let mut c = mono();
        assert!(c.check(GRAVITY).is_ok());
        assert!((c.omega - 3.1321).abs() < 1e-4);
        c.omega *= 1.001;
        assert!(matches!(c.check(GRAVITY), Err(SynthError::DispersionViolation { .. })));
        let g = Grid2D::pixels(4, 4).unwrap();
        assert!(synth_elevation(&[c], g, 0.1, 4).is_err());
    }

    #[test]
    fn empty_sum_is_zero() {
        let g = Grid2D::pixels(4, 3).unwrap();
        let s = synth_elevation(&[], g, 0.1, 3).unwrap();
        assert!(s.frames.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn crest_at_origin() {
        let g = Grid2D::new(4, 4, 0.5, 0.5, 0.0, 0.0).unwrap();
        let s = synth_elevation(&[mono()], g, 0.1, 3).unwrap();
        assert!((s.frames[0].values[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn counter_propagating_pair_is_standing_wave() {
        let a = 0.03;
        let c1 = WaveComponent::deep_water(a, 1.0, 0.0, 0.0, GRAVITY);
        let c2 = WaveComponent::deep_water(a, 1.0, PI, 0.0, GRAVITY);
        let g = Grid2D::new(16, 2, 0.4, 0.4, 0.0, 0.0).unwrap();
        let dt = 0.07;
        let s = synth_elevation(&[c1, c2], g, dt, 10).unwrap();
        for (k, f) in s.frames.iter().enumerate() {
            let t = k as f64 * dt;
            for i in 0..g.nx {
                let exact = 2.0 * a * g.x(i).cos() * (c1.omega * t).cos();
                assert!((f.at(i, 1) - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn crest_and_quadrature_velocities() {
        let c = mono();
        let g = Grid2D::new(4, 2, 0.5, 0.5, 0.0, 0.0).unwrap();
        let u = analytic_surface_velocity(&[c], g, 0.0);
        assert!((u.ux[0] - 0.15660).abs() < 1e-5);
        assert!(u.uz[0].abs() < 1e-15);
        // phase pi/2 reached at X = pi/2
        let u = analytic_subsurface_velocity(&[c], &[[PI / 2.0, 0.0, 0.0]], 0.0).unwrap();
        assert!(u[0][0].abs() < 1e-12);
        assert!((u[0][2] - 0.15660).abs() < 1e-5);
    }

    #[test]
    fn subsurface_decay_and_depth_check() {
        let c = mono();
        let s = analytic_subsurface_velocity(&[c], &[[0.3, 0.2, 0.0]], 0.4).unwrap()[0];
        let d = analytic_subsurface_velocity(&[c], &[[0.3, 0.2, -1.0]], 0.4).unwrap()[0];
        for k in 0..3 {
            assert!((d[k] - s[k] * 0.36787944117144233).abs() < 1e-15);
        }
        let deep = analytic_subsurface_velocity(&[c], &[[0.3, 0.2, -20.0]], 0.4).unwrap()[0];
        let n = |u: [f64; 3]| (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        assert!(n(deep) < 1e-8 * n(s));
        assert!(matches!(
            analytic_subsurface_velocity(&[c], &[[0.0, 0.0, 0.1]], 0.0),
            Err(SynthError::PositiveDepth(_))
        ));
    }

    #[test]
    fn zero_amplitude_gives_zero_velocity() {
        let c = WaveComponent::deep_water(0.0, 1.0, 0.3, 0.0, GRAVITY);
        let g = Grid2D::pixels(3, 3).unwrap();
        let u = analytic_surface_velocity(&[c], g, 1.0);
        assert!(u.ux.iter().chain(&u.uy).chain(&u.uz).all(|&v| v == 0.0));
    }

    #[test]
    fn spatial_mean_vanishes_over_periodic_domain() {
        let k1 = 2.0 * PI / 4.0;
        let comps = [
            WaveComponent::deep_water(0.1, k1, 0.0, 0.3, GRAVITY),
            WaveComponent::deep_water(0.05, 2.0 * k1, PI / 2.0, 1.1, GRAVITY),
        ];
        let g = Grid2D::new(32, 32, 0.25, 0.25, 0.0, 0.0).unwrap();
        let s = synth_elevation(&comps, g, 0.1, 3).unwrap();
        for f in &s.frames {
            let mean: f64 = f.values.iter().sum::<f64>() / f.values.len() as f64;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn variance_equals_half_sum_of_squared_amplitudes() {
        // domain spans 8 wavelengths of the longest component
        let l = 2.0;
        let comps = [
            WaveComponent::deep_water(0.1, 2.0 * PI / l, 0.2, 0.0, GRAVITY),
            WaveComponent::deep_water(0.07, 2.0 * PI / (l / 2.0), 1.9, 0.5, GRAVITY),
            WaveComponent::deep_water(0.04, 2.0 * PI / (l / 3.0), -0.7, 2.0, GRAVITY),
        ];
        let g = Grid2D::new(256, 256, 8.0 * l / 256.0, 8.0 * l / 256.0, 0.0, 0.0).unwrap();
        let s = synth_elevation(&comps, g, 0.1, 3).unwrap();
        let v = &s.frames[0].values;
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        let expected: f64 = comps.iter().map(|c| c.amplitude * c.amplitude / 2.0).sum();
        assert!((var - expected).abs() < 0.01 * expected, "var {var} expected {expected}");
    }

    #[test]
    fn subsurface_field_is_divergence_free() {
        let comps = [
            WaveComponent::deep_water(0.05, 1.0, 0.3, 0.1, GRAVITY),
            WaveComponent::deep_water(0.02, 2.5, 2.0, 1.3, GRAVITY),
        ];
        let h = 1e-3;
        let p = [0.4, -0.7, -0.5];
        let at = |dx: f64, dy: f64, dz: f64| analytic_subsurface_velocity(&comps, &[[p[0] + dx, p[1] + dy, p[2] + dz]], 0.3).unwrap()[0];
        let div = (at(h, 0.0, 0.0)[0] - at(-h, 0.0, 0.0)[0]) / (2.0 * h)
            + (at(0.0, h, 0.0)[1] - at(0.0, -h, 0.0)[1]) / (2.0 * h)
            + (at(0.0, 0.0, h)[2] - at(0.0, 0.0, -h)[2]) / (2.0 * h);
        let scale = at(0.0, 0.0, 0.0).iter().map(|v| v.abs()).sum::<f64>() * 2.5;
        assert!(div.abs() < 1e-6 * scale, "div {div}");
    }
}
