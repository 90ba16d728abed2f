//! Regularized least-squares fit of the potential coefficients.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::FitProblem;
use super::{PotentialBasis, PotentialCoefficients, PotentialError};
use crate::field::{ScalarField, ScalarFieldSeries, VectorField3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Dense below the size limits, conjugate gradients above.
    Auto,
    Dense,
    ConjugateGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Penalty weight; `None` selects `1e-4 * mean|U|^2 / mean(kappa^2)`.
    pub lambda: Option<f64>,
    pub solver: SolverKind,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { lambda: None, solver: SolverKind::Auto, cg_tol: 1e-11, cg_max_iters: 2000 }
    }
}

/// Complex modes up to which the dense solver is considered.
pub const DENSE_MODE_LIMIT: usize = 4096;
/// Cap on `rows * columns^2` for assembling the explicit normal matrix.
const DENSE_FLOP_LIMIT: f64 = 4e9;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameFit {
    /// Independent half-spectrum, see [`PotentialBasis::modes`].
    pub coefficients: Vec<Complex64>,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    pub solver: SolverKind,
}

/// `1e-4 * mean|U|^2 / mean(kappa^2)` over valid nodes and stored modes.
pub fn default_lambda(velocity: &VectorField3, basis: &PotentialBasis) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for i in 0..velocity.ux.len() {
        if velocity.is_valid(i) {
            s += velocity.ux[i].powi(2) + velocity.uy[i].powi(2) + velocity.uz[i].powi(2);
            n += 1;
        }
    }
    let kappa = basis.kappas();
    let mk = kappa.iter().map(|k| k * k).sum::<f64>() / kappa.len() as f64;
    if n == 0 {
        0.0
    } else {
        1e-4 * (s / n as f64) / mk
    }
}

/// Minimizer of the regularized surface misfit for one frame.
pub fn fit_coefficients(
    velocity: &VectorField3,
    eta: &ScalarField,
    basis: &PotentialBasis,
    options: &FitOptions,
) -> Result<FrameFit, PotentialError> {
    let lambda = options.lambda.unwrap_or_else(|| default_lambda(velocity, basis));
    let problem = FitProblem::new(basis, velocity, eta, lambda)?;
    solve_problem(&problem, options)
}

pub fn solve_problem(problem: &FitProblem, options: &FitOptions) -> Result<FrameFit, PotentialError> {
    let nj = problem.n_unknowns();
    let rows = 3.0 * problem.n_points() as f64;
    let cols = 2.0 * nj as f64;
    let dense_ok = nj <= DENSE_MODE_LIMIT && rows * cols * cols <= DENSE_FLOP_LIMIT;
    let kind = match options.solver {
        SolverKind::Auto if dense_ok || problem.lambda == 0.0 => SolverKind::Dense,
        SolverKind::Auto => SolverKind::ConjugateGradient,
        k => k,
    };
    let (coefficients, iterations) = match kind {
        SolverKind::Dense => (solve_dense(problem)?, 0),
        _ => solve_cg(problem, options)?,
    };
    let objective = problem.objective(&coefficients);
    Ok(FrameFit { coefficients, lambda: problem.lambda, objective, iterations, solver: kind })
}

fn solve_dense(problem: &FitProblem) -> Result<Vec<Complex64>, PotentialError> {
    let (a, y) = problem.design_matrix();
    let mut g = a.tr_mul(&a);
    let b = a.tr_mul(&y);
    for (j, k) in problem.kappa().iter().enumerate() {
        let p = 2.0 * problem.lambda * k * k;
        g[(2 * j, 2 * j)] += p;
        g[(2 * j + 1, 2 * j + 1)] += p;
    }
    let x = match cholesky_solve(g, &b) {
        Ok(x) => x,
        Err(cols) => {
            let mut modes: Vec<(i64, i64)> = cols.iter().map(|c| problem.modes()[c / 2]).collect();
            modes.dedup();
            return Err(PotentialError::SingularSystem { modes });
        }
    };
    Ok((0..problem.n_unknowns()).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])).collect())
}

/// Cholesky solve of a symmetric positive semi-definite system. Returns the
/// columns whose pivots vanish when the matrix is singular.
fn cholesky_solve(mut g: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, Vec<usize>> {
    let n = g.nrows();
    let scale = (0..n).map(|i| g[(i, i)]).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut deficient = Vec::new();
    for k in 0..n {
        let mut d = g[(k, k)];
        for p in 0..k {
            d -= g[(k, p)] * g[(k, p)];
        }
        if d <= tol {
            deficient.push(k);
            for i in k..n {
                g[(i, k)] = 0.0;
            }
            continue;
        }
        let d = d.sqrt();
        g[(k, k)] = d;
        let (col_k, rest) = (k, k + 1..n);
        for i in rest {
            let mut s = g[(i, col_k)];
            for p in 0..k {
                s -= g[(i, p)] * g[(k, p)];
            }
            g[(i, k)] = s / d;
        }
    }
    if !deficient.is_empty() {
        return Err(deficient);
    }
    let mut z = b.clone();
    for i in 0..n {
        let mut s = z[i];
        for p in 0..i {
            s -= g[(i, p)] * z[p];
        }
        z[i] = s / g[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for p in i + 1..n {
            s -= g[(p, i)] * z[p];
        }
        z[i] = s / g[(i, i)];
    }
    Ok(z)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Jacobi-preconditioned conjugate gradients on the normal equations.
fn solve_cg(problem: &FitProblem, options: &FitOptions) -> Result<(Vec<Complex64>, usize), PotentialError> {
    let b = problem.rhs();
    let nj = b.len();
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![Complex64::new(0.0, 0.0); nj];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let diag = problem.normal_diagonal();
    let precond = |r: &[Complex64]| -> Vec<Complex64> {
        r.iter().zip(&diag).map(|(v, d)| if *d > 0.0 { v / d } else { *v }).collect()
    };
    let mut r = b.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=options.cg_max_iters {
        let ap = problem.normal_apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(PotentialError::SingularSystem { modes: Vec::new() });
        }
        let alpha = rz / pap;
        for j in 0..nj {
            x[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        if dot(&r, &r).sqrt() <= options.cg_tol * bnorm {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for j in 0..nj {
            p[j] = z[j] + beta * p[j];
        }
    }
    let residual = dot(&r, &r).sqrt() / bnorm;
    Err(PotentialError::NotConverged { iterations: options.cg_max_iters, residual })
}

/// Fits every frame independently. Frames whose velocity is entirely invalid
/// (the first two of a kinematics record) get zero coefficients.
pub fn fit_series(
    velocity: &[VectorField3],
    eta: &ScalarFieldSeries,
    basis: &PotentialBasis,
    options: &FitOptions,
) -> Result<PotentialCoefficients, PotentialError> {
    if velocity.len() != eta.len() {
        return Err(PotentialError::InvalidParameter(format!(
            "{} velocity frames for {} elevation frames",
            velocity.len(),
            eta.len()
        )));
    }
    let fits: Vec<Result<Option<FrameFit>, PotentialError>> = velocity
        .par_iter()
        .zip(eta.frames.par_iter())
        .map(|(v, e)| match fit_coefficients(v, e, basis, options) {
            Ok(f) => Ok(Some(f)),
            Err(PotentialError::NoData) => Ok(None),
            Err(err) => Err(err),
        })
        .collect();
    let mut frames = Vec::with_capacity(fits.len());
    let mut lambdas = Vec::with_capacity(fits.len());
    for f in fits {
        match f? {
            Some(fit) => {
                lambdas.push(fit.lambda);
                frames.push(fit.coefficients);
            }
            None => {
                lambdas.push(0.0);
                frames.push(vec![Complex64::new(0.0, 0.0); basis.len()]);
            }
        }
    }
    Ok(PotentialCoefficients { basis: basis.clone(), dt: eta.dt, t0: eta.t0, lambda: lambdas, frames })
}
