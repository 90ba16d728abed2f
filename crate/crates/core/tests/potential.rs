use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefield::field::{Grid2D, ScalarField, VectorField3};
use wavefield::potential::{
    evaluate_laplacian, evaluate_on_grid, evaluate_potential, evaluate_velocity, fit_coefficients, streamlines,
    FitOptions, FitProblem, PotentialBasis, PotentialCoefficients, PotentialError, SolverKind, StreamlineOptions,
    StreamlineStop,
};
use wavefield::synth::{analytic_subsurface_velocity, analytic_surface_velocity, WaveComponent, GRAVITY};

struct Instance {
    basis: PotentialBasis,
    velocity: VectorField3,
    eta: ScalarField,
}

fn random_instance(seed: u64, n: usize, nm: usize, eta_amp: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Grid2D::new(n, n, 0.5, 0.5, 1.0, -2.0).unwrap();
    let basis = PotentialBasis::for_grid(&g).unwrap();
    let basis = PotentialBasis::new(nm, nm, basis.lx, basis.ly, basis.x0, basis.y0).unwrap();
    let mut vel = VectorField3::zeros(g);
    for c in [&mut vel.ux, &mut vel.uy, &mut vel.uz] {
        c.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }
    let eta = ScalarField::from_fn(g, |x, y| eta_amp * (0.7 * x + 0.3).sin() * (0.4 * y).cos());
    Instance { basis, velocity: vel, eta }
}

/// Independent dense normal-equations solve: columns built from the
/// real-valued basis functions `2 e^{kZ} cos(theta)` and `-2 e^{kZ} sin(theta)`.
fn dense_oracle(inst: &Instance, lambda: f64) -> Vec<Complex64> {
    let b = &inst.basis;
    let mut modes = Vec::new();
    for n in 0..=b.n_max as i64 {
        for m in -(b.m_max as i64)..=b.m_max as i64 {
            if n > 0 || m > 0 {
                modes.push((n, m));
            }
        }
    }
    let g = inst.eta.grid;
    let rows = 3 * g.len();
    let mut a = DMatrix::<f64>::zeros(rows, 2 * modes.len());
    let mut y = DVector::<f64>::zeros(rows);
    for p in 0..g.len() {
        let (x, yy) = (g.x(p % g.nx), g.y(p / g.nx));
        let z = inst.eta.values[p];
        y[3 * p] = inst.velocity.ux[p];
        y[3 * p + 1] = inst.velocity.uy[p];
        y[3 * p + 2] = inst.velocity.uz[p];
        for (j, &(n, m)) in modes.iter().enumerate() {
            let kx = 2.0 * PI * n as f64 / b.lx;
            let ky = 2.0 * PI * m as f64 / b.ly;
            let k = (kx * kx + ky * ky).sqrt();
            let th = kx * (x - b.x0) + ky * (yy - b.y0);
            let e = 2.0 * (k * z).exp();
            // gradient of e cos(th) and of -e sin(th)
            let re = [-kx * e * th.sin(), -ky * e * th.sin(), k * e * th.cos()];
            let im = [-kx * e * th.cos(), -ky * e * th.cos(), -k * e * th.sin()];
            for c in 0..3 {
                a[(3 * p + c, 2 * j)] = re[c];
                a[(3 * p + c, 2 * j + 1)] = im[c];
            }
        }
    }
    let mut normal = a.transpose() * &a;
    for (j, &(n, m)) in modes.iter().enumerate() {
        let k2 = (2.0 * PI * n as f64 / b.lx).powi(2) + (2.0 * PI * m as f64 / b.ly).powi(2);
        normal[(2 * j, 2 * j)] += 2.0 * lambda * k2;
        normal[(2 * j + 1, 2 * j + 1)] += 2.0 * lambda * k2;
    }
    let rhs = a.transpose() * y;
    let x = normal.lu().solve(&rhs).unwrap();
    let by_mode: Vec<Complex64> = (0..modes.len()).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])).collect();
    // reorder into the library's storage order
    inst.basis.modes().iter().map(|nm| by_mode[modes.iter().position(|q| q == nm).unwrap()]).collect()
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn zero_velocity_gives_zero_coefficients() {
    let inst = random_instance(1, 12, 3, 0.1);
    let zero = VectorField3::zeros(inst.eta.grid);
    for solver in [SolverKind::Dense, SolverKind::ConjugateGradient] {
        let opts = FitOptions { lambda: Some(1e-3), solver, ..FitOptions::default() };
        let fit = fit_coefficients(&zero, &inst.eta, &inst.basis, &opts).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.norm() == 0.0));
    }
}

#[test]
fn solvers_match_dense_oracle() {
    for seed in 0..4 {
        for eta_amp in [0.0, 0.2, 3.0] {
            let inst = random_instance(seed, 20, 2, eta_amp);
            let lambda = 1e-3;
            let oracle = dense_oracle(&inst, lambda);
            for solver in [SolverKind::Dense, SolverKind::ConjugateGradient] {
                let opts = FitOptions { lambda: Some(lambda), solver, ..FitOptions::default() };
                let fit = fit_coefficients(&inst.velocity, &inst.eta, &inst.basis, &opts).unwrap();
                let err = rel_diff(&fit.coefficients, &oracle);
                assert!(err < 1e-8, "seed {seed} eta {eta_amp} {solver:?}: {err}");
            }
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for (seed, eta_amp) in [(3u64, 0.1), (4, 2.5)] {
        let inst = random_instance(seed, 10, 2, eta_amp);
        let problem = FitProblem::new(&inst.basis, &inst.velocity, &inst.eta, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let a: Vec<Complex64> = (0..problem.n_unknowns())
            .map(|_| Complex64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
            .collect();
        let g = problem.gradient(&a);
        // the objective is quadratic, so central differences carry no
        // truncation error and a large step keeps round-off small
        let h = 1e-3;
        for j in 0..a.len() {
            for part in 0..2 {
                let bump = if part == 0 { Complex64::new(h, 0.0) } else { Complex64::new(0.0, h) };
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[j] += bump;
                am[j] -= bump;
                let fd = (problem.objective(&ap) - problem.objective(&am)) / (2.0 * h);
                let an = if part == 0 { g[j].re } else { g[j].im };
                let err = (fd - an).abs() / an.abs().max(1e-3);
                assert!(err < 1e-6, "mode {j} part {part}: fd {fd} analytic {an}");
            }
        }
    }
}

#[test]
fn singular_system_reports_modes() {
    // 6 x 6 samples cannot separate wavenumbers beyond their Nyquist limit
    let g = Grid2D::new(6, 6, 1.0, 1.0, 0.0, 0.0).unwrap();
    let basis = PotentialBasis::new(4, 4, 6.0, 6.0, 0.0, 0.0).unwrap();
    let vel = VectorField3::zeros(g);
    let eta = ScalarField::zeros(g);
    let opts = FitOptions { lambda: Some(0.0), ..FitOptions::default() };
    match fit_coefficients(&vel, &eta, &basis, &opts) {
        Err(PotentialError::SingularSystem { modes }) => assert!(!modes.is_empty()),
        other => panic!("expected singular system, got {other:?}"),
    }
    // a positive penalty makes the same system solvable
    let opts = FitOptions { lambda: Some(1e-6), ..FitOptions::default() };
    assert!(fit_coefficients(&vel, &eta, &basis, &opts).is_ok());
}

#[test]
fn penalty_norm_decreases_with_lambda() {
    let inst = random_instance(9, 16, 3, 0.3);
    let kappa = inst.basis.kappas();
    let mut last = f64::INFINITY;
    for lambda in [0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let opts = FitOptions { lambda: Some(lambda), solver: SolverKind::Dense, ..FitOptions::default() };
        let fit = fit_coefficients(&inst.velocity, &inst.eta, &inst.basis, &opts).unwrap();
        let norm: f64 = fit.coefficients.iter().zip(&kappa).map(|(a, k)| (k * a).norm_sqr()).sum();
        assert!(norm <= last * (1.0 + 1e-12), "lambda {lambda}: {norm} > {last}");
        last = norm;
        // objective never exceeds the a = 0 value
        let half_u2: f64 = [&inst.velocity.ux, &inst.velocity.uy, &inst.velocity.uz]
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| 0.5 * v * v)
            .sum();
        assert!(fit.objective <= half_u2);
    }
}

/// Single component aligned with basis mode (4, 0) on a 4-wavelength domain.
fn aligned_wave(a: f64) -> (Vec<WaveComponent>, Grid2D, ScalarField, VectorField3) {
    let comp = WaveComponent::deep_water(a, 1.0, 0.0, 0.3, GRAVITY);
    let l = 8.0 * PI;
    let g = Grid2D::new(64, 64, l / 64.0, l / 64.0, 0.0, 0.0).unwrap();
    let eta = ScalarField::from_fn(g, |x, y| a * comp.phase_at(x, y, 0.0).cos());
    let vel = analytic_surface_velocity(&[comp], g, 0.0);
    (vec![comp], g, eta, vel)
}

#[test]
fn single_mode_energy_concentrates() {
    let a = 0.002;
    let (comps, g, eta, vel) = aligned_wave(a);
    let basis = PotentialBasis::for_grid(&g).unwrap();
    let fit = fit_coefficients(&vel, &eta, &basis, &FitOptions::default()).unwrap();
    let peak_idx = basis.index_of(4, 0).unwrap();
    let peak = fit.coefficients[peak_idx].norm();
    // a cosine potential splits evenly over the conjugate pair
    let expect = GRAVITY * a / comps[0].omega;
    assert!((2.0 * peak - expect).abs() < 0.05 * expect, "2|a| = {} expected {expect}", 2.0 * peak);
    for (j, c) in fit.coefficients.iter().enumerate() {
        if j != peak_idx {
            assert!(c.norm() < 0.01 * peak, "mode {:?}: {}", basis.modes()[j], c.norm());
        }
    }
}

#[test]
fn evaluation_properties() {
    let a = 0.02;
    let (comps, g, eta, vel) = aligned_wave(a);
    let basis = PotentialBasis::for_grid(&g).unwrap();
    let fit = fit_coefficients(&vel, &eta, &basis, &FitOptions::default()).unwrap();
    let coeffs = PotentialCoefficients::single(basis.clone(), fit.coefficients.clone(), fit.lambda);

    // zero coefficients give zero velocity
    let zero = PotentialCoefficients::single(basis.clone(), vec![Complex64::new(0.0, 0.0); basis.len()], 0.0);
    assert!(evaluate_velocity(&zero, &[[1.0, 2.0, -0.5]], 0).unwrap()[0] == [0.0; 3]);

    // residual at z = eta is consistent with the reported objective
    let pts: Vec<[f64; 3]> = (0..g.len()).map(|p| [g.x(p % g.nx), g.y(p / g.nx), eta.values[p]]).collect();
    let u = evaluate_velocity(&coeffs, &pts, 0).unwrap();
    let data: f64 = (0..g.len())
        .map(|p| {
            (u[p][0] - vel.ux[p]).powi(2) + (u[p][1] - vel.uy[p]).powi(2) + (u[p][2] - vel.uz[p]).powi(2)
        })
        .sum::<f64>()
        * 0.5;
    let kappa = basis.kappas();
    let penalty: f64 = fit.lambda * fit.coefficients.iter().zip(&kappa).map(|(c, k)| (k * c).norm_sqr()).sum::<f64>();
    assert!((data + penalty - fit.objective).abs() < 1e-9 * fit.objective.max(1e-12));

    // separable grid evaluation agrees with the pointwise sum
    let on_grid = evaluate_on_grid(&coeffs, g, -0.7, 0).unwrap();
    let pts: Vec<[f64; 3]> = (0..g.len()).map(|p| [g.x(p % g.nx), g.y(p / g.nx), -0.7]).collect();
    let direct = evaluate_velocity(&coeffs, &pts, 0).unwrap();
    for p in 0..g.len() {
        for c in 0..3 {
            assert!((on_grid.component(c)[p] - direct[p][c]).abs() < 1e-12);
        }
    }

    // decay at Z = -1/k against the analytic field
    let z = -1.0;
    let deep: Vec<[f64; 3]> = (0..8).map(|i| [i as f64 * 0.9, 1.3, z]).collect();
    let got = evaluate_velocity(&coeffs, &deep, 0).unwrap();
    let exact = analytic_subsurface_velocity(&comps, &deep, 0.0).unwrap();
    let mag = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let surface_mag = a * comps[0].omega;
    for (gv, ev) in got.iter().zip(&exact) {
        assert!((mag(*gv) - surface_mag * (-1f64).exp()).abs() < 0.05 * surface_mag * (-1f64).exp());
        assert!((mag(*gv) - mag(*ev)).abs() < 0.05 * mag(*ev));
    }
}

fn random_coefficients(seed: u64) -> PotentialCoefficients {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = PotentialBasis::new(3, 2, 12.0, 9.0, 0.5, -1.0).unwrap();
    let a = (0..basis.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    PotentialCoefficients::single(basis, a, 0.0)
}

#[test]
fn potential_is_harmonic() {
    let coeffs = random_coefficients(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts: Vec<[f64; 3]> =
        (0..50).map(|_| [rng.random_range(0.0..12.0), rng.random_range(-1.0..8.0), rng.random_range(-3.0..0.0)]).collect();
    let lap = evaluate_laplacian(&coeffs, &pts, 0).unwrap();
    let scale: f64 = coeffs.frames[0]
        .iter()
        .zip(coeffs.basis.kappas())
        .map(|(a, k)| 2.0 * a.norm() * k * k)
        .sum();
    for v in &lap {
        assert!(v.abs() < 1e-8 * scale, "laplacian {v}");
    }
    // finite-difference Laplacian of the potential agrees to stencil accuracy
    let h = 1e-2;
    for p in pts.iter().take(10) {
        let mut s = 0.0;
        for c in 0..3 {
            let mut pp = *p;
            let mut pm = *p;
            pp[c] += h;
            pm[c] -= h;
            let v = evaluate_potential(&coeffs, &[pp, *p, pm], 0).unwrap();
            s += (v[0] - 2.0 * v[1] + v[2]) / (h * h);
        }
        assert!(s.abs() < 1e-3 * scale, "fd laplacian {s}");
    }
}

proptest! {
    #[test]
    fn each_mode_decays_exponentially(n in 0i64..4, m in -2i64..3, z in -4.0f64..0.0, x in 0.0f64..12.0, y in 0.0f64..9.0) {
        prop_assume!(n > 0 || m > 0);
        let basis = PotentialBasis::new(3, 2, 12.0, 9.0, 0.0, 0.0).unwrap();
        let mut a = vec![Complex64::new(0.0, 0.0); basis.len()];
        a[basis.index_of(n, m).unwrap()] = Complex64::new(0.3, -0.4);
        let c = PotentialCoefficients::single(basis.clone(), a, 0.0);
        let top = evaluate_velocity(&c, &[[x, y, 0.0]], 0).unwrap()[0];
        let low = evaluate_velocity(&c, &[[x, y, z]], 0).unwrap()[0];
        let f = (basis.kappa(n, m) * z).exp();
        for k in 0..3 {
            prop_assert!((low[k] - top[k] * f).abs() <= 1e-12 * (top[k].abs() + 1.0));
        }
    }
}

#[test]
fn zero_field_streamlines_repeat_seed() {
    let basis = PotentialBasis::new(2, 2, 10.0, 10.0, 0.0, 0.0).unwrap();
    let c = PotentialCoefficients::single(basis.clone(), vec![Complex64::new(0.0, 0.0); basis.len()], 0.0);
    let opts = StreamlineOptions { step: 0.1, n_steps: 5, surface: None, bounds: None };
    let lines = streamlines(&c, &[[1.0, 2.0, -1.0]], 0, &opts).unwrap();
    assert_eq!(lines[0].points, vec![[1.0, 2.0, -1.0]; 6]);
    assert_eq!(lines[0].stop, StreamlineStop::Stagnation);
}

/// Two-dimensional mode `Phi = A e^{kZ} cos(kX)`: the stream function
/// `psi = -A e^{kZ} sin(kX)` is constant along streamlines.
fn plane_mode() -> PotentialCoefficients {
    let basis = PotentialBasis::new(2, 0, 4.0 * PI, 1.0, 0.0, 0.0).unwrap();
    let mut a = vec![Complex64::new(0.0, 0.0); basis.len()];
    // mode n = 2 gives k = 1; Phi = 2 Re(a e^{ikX}) = cos(kX) for a = 1/2
    a[basis.index_of(2, 0).unwrap()] = Complex64::new(0.5, 0.0);
    PotentialCoefficients::single(basis, a, 0.0)
}

#[test]
fn streamlines_follow_stream_function() {
    let c = plane_mode();
    let seed = [2.0, 0.5, -1.5];
    let psi = |p: [f64; 3]| -(p[2]).exp() * p[0].sin();
    let opts = StreamlineOptions { step: 0.02, n_steps: 150, surface: None, bounds: Some([0.0, 4.0 * PI, -1.0, 2.0]) };
    let line = &streamlines(&c, &[seed], 0, &opts).unwrap()[0];
    assert!(line.points.len() > 10);
    for p in &line.points {
        assert!((psi(*p) - psi(seed)).abs() < 1e-8, "psi drift at {p:?}");
    }
}

#[test]
fn streamline_endpoints_converge_at_fourth_order() {
    let c = plane_mode();
    let seed = [2.0, 0.5, -1.5];
    let end = |step: f64| {
        let n = (2.0 / step).round() as usize;
        let opts = StreamlineOptions { step, n_steps: n, surface: None, bounds: Some([0.0, 4.0 * PI, -1.0, 2.0]) };
        *streamlines(&c, &[seed], 0, &opts).unwrap()[0].points.last().unwrap()
    };
    let (e1, e2, e3) = (end(0.2), end(0.1), end(0.05));
    let d = |a: [f64; 3], b: [f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let ratio = d(e1, e2) / d(e2, e3);
    assert!(ratio > 12.0 && ratio < 20.0, "convergence ratio {ratio}");
}

#[test]
fn streamlines_stop_at_surface() {
    let c = plane_mode();
    // upward flow above X = 0 where Phi_z > 0
    let g = Grid2D::new(64, 4, 4.0 * PI / 63.0, 1.0, 0.0, -1.0).unwrap();
    let surface = ScalarField::constant(g, -0.5);
    let opts = StreamlineOptions { step: 0.05, n_steps: 400, surface: Some(surface), bounds: None };
    let line = &streamlines(&c, &[[0.05, 0.5, -2.0]], 0, &opts).unwrap()[0];
    assert_eq!(line.stop, StreamlineStop::Surface);
    assert!(line.truncated());
    assert!(line.points.iter().all(|p| p[2] <= -0.5));
}
