//! Least-squares operator mapping independent coefficients to surface velocities.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{PotentialBasis, PotentialError};
use crate::field::{FieldError, Grid2D, ScalarField, VectorField3};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest `kappa * |eta|` for which `e^{kappa eta}` is expanded in a power
/// series; beyond it the operator sums modes directly.
const TAYLOR_LIMIT: f64 = 6.0;

enum Evaluator {
    /// `eta^q / q!` at every node for `q < len`.
    Taylor(Vec<Vec<f64>>),
    Direct,
}

/// One frame's fit: the data, the basis tables and the regularization weight.
///
/// Coefficients are passed as complex numbers `re + i im` of the independent
/// modes; gradients use the same packing (`d/d re + i d/d im`).
pub struct FitProblem {
    pub basis: PotentialBasis,
    pub grid: Grid2D,
    pub lambda: f64,
    eta: Vec<f64>,
    valid: Vec<bool>,
    u: [Vec<f64>; 3],
    modes: Vec<(i64, i64)>,
    kappa: Vec<f64>,
    /// `e^{i k_n (x - x0)}` for `n = 0..=N`.
    ex: Vec<Vec<Complex64>>,
    /// `e^{i k_m (y - y0)}` for `m = -M..=M`.
    ey: Vec<Vec<Complex64>>,
    evaluator: Evaluator,
}

impl FitProblem {
    pub fn new(
        basis: &PotentialBasis,
        velocity: &VectorField3,
        eta: &ScalarField,
        lambda: f64,
    ) -> Result<Self, PotentialError> {
        let grid = eta.grid;
        if velocity.grid != grid {
            return Err(FieldError::GridMismatch("velocity and elevation grids differ".into()).into());
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(PotentialError::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        let valid: Vec<bool> = (0..grid.len())
            .map(|i| {
                eta.is_valid(i)
                    && velocity.is_valid(i)
                    && eta.values[i].is_finite()
                    && (0..3).all(|c| velocity.component(c)[i].is_finite())
            })
            .collect();
        if !valid.iter().any(|&v| v) {
            return Err(PotentialError::NoData);
        }
        let pick = |v: &[f64]| v.iter().zip(&valid).map(|(&x, &ok)| if ok { x } else { 0.0 }).collect::<Vec<_>>();
        let eta_v = pick(&eta.values);
        let u = [pick(&velocity.ux), pick(&velocity.uy), pick(&velocity.uz)];
        let modes = basis.modes();
        let kappa = basis.kappas();
        let ex = (0..=basis.n_max as i64)
            .map(|n| (0..grid.nx).map(|i| Complex64::from_polar(1.0, basis.k_n(n) * (grid.x(i) - basis.x0))).collect())
            .collect();
        let mm = basis.m_max as i64;
        let ey = (-mm..=mm)
            .map(|m| (0..grid.ny).map(|j| Complex64::from_polar(1.0, basis.k_m(m) * (grid.y(j) - basis.y0))).collect())
            .collect();
        let eta_max = eta_v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let s = basis.max_kappa() * eta_max;
        let evaluator = if s <= TAYLOR_LIMIT {
            let mut order = 1;
            let mut term = 1.0;
            // stop once the remainder bound drops below double precision
            while term * s.exp() > 1e-17 {
                term *= s / order as f64;
                order += 1;
            }
            let mut powers = Vec::with_capacity(order);
            let mut cur = vec![1.0; grid.len()];
            for q in 0..order {
                if q > 0 {
                    for (c, e) in cur.iter_mut().zip(&eta_v) {
                        *c *= e / q as f64;
                    }
                }
                powers.push(cur.iter().zip(&valid).map(|(&c, &ok)| if ok { c } else { 0.0 }).collect());
            }
            Evaluator::Taylor(powers)
        } else {
            Evaluator::Direct
        };
        Ok(Self { basis: basis.clone(), grid, lambda, eta: eta_v, valid, u, modes, kappa, ex, ey, evaluator })
    }

    pub fn n_unknowns(&self) -> usize {
        self.modes.len()
    }

    pub fn n_points(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn modes(&self) -> &[(i64, i64)] {
        &self.modes
    }

    pub fn data(&self) -> &[Vec<f64>; 3] {
        &self.u
    }

    /// `(d/dX, d/dY, d/dZ)` multipliers of mode `j`.
    #[inline]
    fn factors(&self, j: usize) -> [Complex64; 3] {
        let (n, m) = self.modes[j];
        [
            Complex64::new(0.0, self.basis.k_n(n)),
            Complex64::new(0.0, self.basis.k_m(m)),
            Complex64::new(self.kappa[j], 0.0),
        ]
    }

    fn table_index(&self, n: i64, m: i64) -> (usize, usize) {
        (n as usize, (m + self.basis.m_max as i64) as usize)
    }

    /// Model velocity at every node (zero at invalid nodes).
    pub fn apply(&self, a: &[Complex64]) -> [Vec<f64>; 3] {
        assert_eq!(a.len(), self.modes.len());
        match &self.evaluator {
            Evaluator::Taylor(powers) => self.apply_taylor(a, powers),
            Evaluator::Direct => self.apply_direct(a),
        }
    }

    fn apply_taylor(&self, a: &[Complex64], powers: &[Vec<f64>]) -> [Vec<f64>; 3] {
        let g = self.grid;
        let (n1, m1) = (self.basis.n_max + 1, 2 * self.basis.m_max + 1);
        let partial: Vec<[Vec<f64>; 3]> = powers
            .par_iter()
            .enumerate()
            .map(|(q, pw)| {
                let mut out = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
                for (c, oc) in out.iter_mut().enumerate() {
                    let mut b = vec![ZERO; n1 * m1];
                    for (j, &(n, m)) in self.modes.iter().enumerate() {
                        let (ni, mi) = self.table_index(n, m);
                        b[ni * m1 + mi] = a[j] * self.kappa[j].powi(q as i32) * self.factors(j)[c];
                    }
                    let f = self.synthesize(&b);
                    for ((o, fv), p) in oc.iter_mut().zip(&f).zip(pw) {
                        *o += 2.0 * p * fv.re;
                    }
                }
                out
            })
            .collect();
        let mut out = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
        for p in partial {
            for c in 0..3 {
                for (o, v) in out[c].iter_mut().zip(&p[c]) {
                    *o += v;
                }
            }
        }
        out
    }

    /// `F(x_i, y_j) = sum_{n,m} b[n][m] e^{i(k_n x + k_m y)}` over the stored half.
    fn synthesize(&self, b: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid;
        let (n1, m1) = (self.basis.n_max + 1, 2 * self.basis.m_max + 1);
        let mut t = vec![ZERO; m1 * g.nx];
        for mi in 0..m1 {
            let row = &mut t[mi * g.nx..(mi + 1) * g.nx];
            for ni in 0..n1 {
                let c = b[ni * m1 + mi];
                if c == ZERO {
                    continue;
                }
                for (r, e) in row.iter_mut().zip(&self.ex[ni]) {
                    *r += c * e;
                }
            }
        }
        let mut f = vec![ZERO; g.len()];
        for j in 0..g.ny {
            let out = &mut f[j * g.nx..(j + 1) * g.nx];
            for mi in 0..m1 {
                let e = self.ey[mi][j];
                for (o, tv) in out.iter_mut().zip(&t[mi * g.nx..(mi + 1) * g.nx]) {
                    *o += e * tv;
                }
            }
        }
        f
    }

    /// `S[n][m] = sum_{i,j} w(x_i, y_j) e^{-i(k_n x + k_m y)}` over the stored half.
    fn analyze(&self, w: &[f64]) -> Vec<Complex64> {
        let g = self.grid;
        let (n1, m1) = (self.basis.n_max + 1, 2 * self.basis.m_max + 1);
        let mut v = vec![ZERO; m1 * g.nx];
        for mi in 0..m1 {
            let out = &mut v[mi * g.nx..(mi + 1) * g.nx];
            for j in 0..g.ny {
                let e = self.ey[mi][j].conj();
                for (o, wv) in out.iter_mut().zip(&w[j * g.nx..(j + 1) * g.nx]) {
                    *o += e * wv;
                }
            }
        }
        let mut s = vec![ZERO; n1 * m1];
        for ni in 0..n1 {
            for mi in 0..m1 {
                s[ni * m1 + mi] = v[mi * g.nx..(mi + 1) * g.nx]
                    .iter()
                    .zip(&self.ex[ni])
                    .map(|(a, e)| a * e.conj())
                    .sum();
            }
        }
        s
    }

    fn apply_direct(&self, a: &[Complex64]) -> [Vec<f64>; 3] {
        let g = self.grid;
        let rows: Vec<[f64; 3]> = (0..g.len())
            .into_par_iter()
            .map(|p| {
                if !self.valid[p] {
                    return [0.0; 3];
                }
                let mut v = [0.0; 3];
                self.for_each_mode_at(p, |j, w| {
                    let f = self.factors(j);
                    let aw = a[j] * w;
                    for c in 0..3 {
                        v[c] += 2.0 * (aw * f[c]).re;
                    }
                });
                v
            })
            .collect();
        let mut out = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
        for (p, v) in rows.iter().enumerate() {
            for c in 0..3 {
                out[c][p] = v[c];
            }
        }
        out
    }

    /// Calls `f(j, e^{kappa_j eta_p} e^{i theta_j(p)})` for every stored mode.
    #[inline]
    fn for_each_mode_at(&self, p: usize, mut f: impl FnMut(usize, Complex64)) {
        let (i, jy) = (p % self.grid.nx, p / self.grid.nx);
        let z = self.eta[p];
        for (j, &(n, m)) in self.modes.iter().enumerate() {
            let (ni, mi) = self.table_index(n, m);
            f(j, self.ex[ni][i] * self.ey[mi][jy] * (self.kappa[j] * z).exp());
        }
    }

    /// Gradient of `sum_p r(p) . v(p)` with respect to the coefficients.
    pub fn adjoint(&self, r: &[Vec<f64>; 3]) -> Vec<Complex64> {
        match &self.evaluator {
            Evaluator::Taylor(powers) => {
                let (m1, nj) = (2 * self.basis.m_max + 1, self.modes.len());
                let partial: Vec<Vec<Complex64>> = powers
                    .par_iter()
                    .enumerate()
                    .map(|(q, pw)| {
                        let mut grad = vec![ZERO; nj];
                        for (c, rc) in r.iter().enumerate() {
                            let w: Vec<f64> = rc
                                .iter()
                                .zip(pw)
                                .zip(&self.valid)
                                .map(|((x, p), &ok)| if ok { x * p } else { 0.0 })
                                .collect();
                            let s = self.analyze(&w);
                            for (j, &(n, m)) in self.modes.iter().enumerate() {
                                let (ni, mi) = self.table_index(n, m);
                                grad[j] += 2.0 * self.kappa[j].powi(q as i32) * self.factors(j)[c].conj() * s[ni * m1 + mi];
                            }
                        }
                        grad
                    })
                    .collect();
                let mut grad = vec![ZERO; nj];
                for p in partial {
                    for (g, v) in grad.iter_mut().zip(p) {
                        *g += v;
                    }
                }
                grad
            }
            Evaluator::Direct => {
                let nj = self.modes.len();
                (0..self.grid.len())
                    .into_par_iter()
                    .filter(|&p| self.valid[p])
                    .fold(
                        || vec![ZERO; nj],
                        |mut acc, p| {
                            self.for_each_mode_at(p, |j, w| {
                                let f = self.factors(j);
                                let wc = w.conj();
                                for c in 0..3 {
                                    acc[j] += 2.0 * r[c][p] * f[c].conj() * wc;
                                }
                            });
                            acc
                        },
                    )
                    .reduce(
                        || vec![ZERO; nj],
                        |mut a, b| {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x += y;
                            }
                            a
                        },
                    )
            }
        }
    }

    /// `A^T A a + 2 lambda kappa^2 a`.
    pub fn normal_apply(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.adjoint(&self.apply(a));
        for ((o, x), k) in out.iter_mut().zip(a).zip(&self.kappa) {
            *o += 2.0 * self.lambda * k * k * x;
        }
        out
    }

    pub fn rhs(&self) -> Vec<Complex64> {
        self.adjoint(&self.u)
    }

    fn residual(&self, a: &[Complex64]) -> [Vec<f64>; 3] {
        let mut v = self.apply(a);
        for c in 0..3 {
            for (x, u) in v[c].iter_mut().zip(&self.u[c]) {
                *x -= u;
            }
        }
        v
    }

    /// `1/2 |grad Phi - U|^2 + 1/2 lambda sum |kappa a|^2` over the full spectrum.
    pub fn objective(&self, a: &[Complex64]) -> f64 {
        let r = self.residual(a);
        let data: f64 = r.iter().flat_map(|c| c.iter()).map(|x| x * x).sum::<f64>() * 0.5;
        data + self.penalty(a)
    }

    fn penalty(&self, a: &[Complex64]) -> f64 {
        // each stored mode stands for itself and its conjugate partner
        self.lambda * a.iter().zip(&self.kappa).map(|(x, k)| k * k * x.norm_sqr()).sum::<f64>()
    }

    pub fn gradient(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut g = self.adjoint(&self.residual(a));
        for ((o, x), k) in g.iter_mut().zip(a).zip(&self.kappa) {
            *o += 2.0 * self.lambda * k * k * x;
        }
        g
    }

    /// Diagonal of the normal matrix (identical for the real and imaginary part).
    pub fn normal_diagonal(&self) -> Vec<f64> {
        let pts: Vec<f64> = self.eta.iter().zip(&self.valid).filter(|(_, &ok)| ok).map(|(e, _)| *e).collect();
        self.kappa
            .par_iter()
            .map(|&k| {
                let s: f64 = pts.iter().map(|e| (2.0 * k * e).exp()).sum();
                4.0 * k * k * s + 2.0 * self.lambda * k * k
            })
            .collect()
    }

    /// Explicit real design matrix, rows `3p + c` over valid nodes, columns
    /// `2j` (real part) and `2j + 1` (imaginary part).
    pub fn design_matrix(&self) -> (nalgebra::DMatrix<f64>, nalgebra::DVector<f64>) {
        let pts: Vec<usize> = (0..self.grid.len()).filter(|&p| self.valid[p]).collect();
        let ncol = 2 * self.modes.len();
        let mut a = nalgebra::DMatrix::zeros(3 * pts.len(), ncol);
        let mut y = nalgebra::DVector::zeros(3 * pts.len());
        for (row, &p) in pts.iter().enumerate() {
            for c in 0..3 {
                y[3 * row + c] = self.u[c][p];
            }
            self.for_each_mode_at(p, |j, w| {
                let f = self.factors(j);
                for c in 0..3 {
                    let fw = f[c] * w;
                    a[(3 * row + c, 2 * j)] = 2.0 * fw.re;
                    a[(3 * row + c, 2 * j + 1)] = -2.0 * fw.im;
                }
            });
        }
        (a, y)
    }
}
