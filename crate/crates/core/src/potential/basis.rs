use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PotentialError;
use crate::field::Grid2D;

/// Truncated Fourier basis of harmonic functions `e^{kappa Z} e^{i(k_n X + k_m Y)}`.
///
/// Only the half plane `n > 0` or `n == 0, m > 0` is stored; the other half
/// follows from Hermitian symmetry and the constant mode is dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialBasis {
    pub n_max: usize,
    pub m_max: usize,
    pub lx: f64,
    pub ly: f64,
    /// Phase origin.
    pub x0: f64,
    pub y0: f64,
}

impl PotentialBasis {
    pub fn new(n_max: usize, m_max: usize, lx: f64, ly: f64, x0: f64, y0: f64) -> Result<Self, PotentialError> {
        if n_max == 0 && m_max == 0 {
            return Err(PotentialError::InvalidBasis("basis needs at least one non-constant mode".into()));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(PotentialError::InvalidBasis(format!("extents must be positive, got {lx} x {ly}")));
        }
        Ok(Self { n_max, m_max, lx, ly, x0, y0 })
    }

    /// Basis spanning the periodic extent of `grid` with `nx/4 x ny/4` modes.
    pub fn for_grid(grid: &Grid2D) -> Result<Self, PotentialError> {
        Self::new((grid.nx / 4).max(1), grid.ny / 4, grid.extent_x(), grid.extent_y(), grid.x0, grid.y0)
    }

    #[inline]
    pub fn k_n(&self, n: i64) -> f64 {
        2.0 * PI * n as f64 / self.lx
    }

    #[inline]
    pub fn k_m(&self, m: i64) -> f64 {
        2.0 * PI * m as f64 / self.ly
    }

    #[inline]
    pub fn kappa(&self, n: i64, m: i64) -> f64 {
        self.k_n(n).hypot(self.k_m(m))
    }

    /// Number of independent complex modes.
    pub fn len(&self) -> usize {
        self.n_max * (2 * self.m_max + 1) + self.m_max
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of modes of the full `[-N, N] x [-M, M]` grid.
    pub fn full_len(&self) -> usize {
        (2 * self.n_max + 1) * (2 * self.m_max + 1)
    }

    /// `(n, m)` of each independent mode, in storage order.
    pub fn modes(&self) -> Vec<(i64, i64)> {
        let (nm, mm) = (self.n_max as i64, self.m_max as i64);
        let mut out = Vec::with_capacity(self.len());
        out.extend((1..=mm).map(|m| (0, m)));
        for n in 1..=nm {
            out.extend((-mm..=mm).map(|m| (n, m)));
        }
        out
    }

    /// Storage index of an independent mode.
    pub fn index_of(&self, n: i64, m: i64) -> Option<usize> {
        let (nm, mm) = (self.n_max as i64, self.m_max as i64);
        if n == 0 && (1..=mm).contains(&m) {
            Some((m - 1) as usize)
        } else if (1..=nm).contains(&n) && (-mm..=mm).contains(&m) {
            Some((mm + (n - 1) * (2 * mm + 1) + (m + mm)) as usize)
        } else {
            None
        }
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.modes().into_iter().map(|(n, m)| self.kappa(n, m)).collect()
    }

    pub fn max_kappa(&self) -> f64 {
        self.kappa(self.n_max as i64, self.m_max as i64)
    }

    /// Expands independent coefficients to the full Hermitian `[2N+1][2M+1]`
    /// array, row `n + N`, column `m + M`.
    pub fn to_full(&self, half: &[Complex64]) -> Vec<Complex64> {
        let w = 2 * self.m_max + 1;
        let mut full = vec![Complex64::new(0.0, 0.0); self.full_len()];
        let (nm, mm) = (self.n_max as i64, self.m_max as i64);
        for ((n, m), a) in self.modes().into_iter().zip(half) {
            full[((n + nm) as usize) * w + (m + mm) as usize] = *a;
            full[((-n + nm) as usize) * w + (-m + mm) as usize] = a.conj();
        }
        full
    }

    /// Inverse of [`to_full`](Self::to_full); the dependent half is ignored.
    pub fn from_full(&self, full: &[Complex64]) -> Vec<Complex64> {
        let w = 2 * self.m_max + 1;
        let (nm, mm) = (self.n_max as i64, self.m_max as i64);
        self.modes()
            .into_iter()
            .map(|(n, m)| full[((n + nm) as usize) * w + (m + mm) as usize])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let b = PotentialBasis::new(2, 3, 10.0, 5.0, 0.0, 0.0).unwrap();
        let modes = b.modes();
        assert_eq!(modes.len(), b.len());
        assert_eq!(2 * b.len() + 1, b.full_len());
        for (i, (n, m)) in modes.iter().enumerate() {
            assert_eq!(b.index_of(*n, *m), Some(i));
        }
        assert_eq!(b.index_of(0, 0), None);
        assert_eq!(b.index_of(0, -1), None);
        assert_eq!(b.index_of(-1, 2), None);
    }

    #[test]
    fn wavenumbers_and_kappa() {
        let b = PotentialBasis::new(3, 2, 4.0, 8.0, 0.0, 0.0).unwrap();
        assert!((b.k_n(1) - PI / 2.0).abs() < 1e-15);
        assert!((b.k_m(-2) + PI / 2.0).abs() < 1e-15);
        assert!((b.kappa(1, 2) - (PI / 2.0) * 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(b.kappa(0, 0), 0.0);
        assert!(b.kappas().iter().all(|&k| k > 0.0));
    }

    #[test]
    fn hermitian_expansion() {
        let b = PotentialBasis::new(1, 1, 1.0, 1.0, 0.0, 0.0).unwrap();
        let half: Vec<Complex64> = (0..b.len()).map(|i| Complex64::new(i as f64 + 1.0, -(i as f64))).collect();
        let full = b.to_full(&half);
        assert_eq!(full[4], Complex64::new(0.0, 0.0));
        for n in -1i64..=1 {
            for m in -1i64..=1 {
                let a = full[((n + 1) * 3 + m + 1) as usize];
                let c = full[((-n + 1) * 3 - m + 1) as usize];
                assert_eq!(a, c.conj());
            }
        }
        assert_eq!(b.from_full(&full), half);
    }

    #[test]
    fn rejects_degenerate_basis() {
        assert!(PotentialBasis::new(0, 0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(PotentialBasis::new(1, 0, 0.0, 1.0, 0.0, 0.0).is_err());
    }
}
