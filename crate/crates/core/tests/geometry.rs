use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wavefield::field::Grid2D;
use wavefield::geometry::{
    fit_plane, plane_disparity, project_eta, to_camera, to_global, triangulate, CameraIntrinsics, PlaneFitOptions,
    PlanePose, StereoRig,
};

fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    // normals compared up to orientation
    (dot.abs() / (na * nb)).min(1.0).acos().to_degrees()
}

fn noisy_plane(n: usize, sigma: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..n)
        .map(|_| {
            let x = rng.random_range(-10.0..10.0);
            let y = rng.random_range(-10.0..10.0);
            [x, y, 0.1 * x + 0.05 * y + 2.0 + noise.sample(&mut rng)]
        })
        .collect()
}

#[test]
fn noisy_plane_normal_within_half_degree() {
    let pts = noisy_plane(10_000, 0.01, 1);
    let opts = PlaneFitOptions { inlier_tol: 0.05, seed: 3, ..PlaneFitOptions::default() };
    let pose = fit_plane(&pts, &opts).unwrap();
    let err = angle_deg(pose.normal(), [-0.1, -0.05, 1.0]);
    assert!(err < 0.5, "normal error {err} deg");
    assert!(pose.inlier_fraction > 0.95);
}

#[test]
fn gross_outliers_are_rejected() {
    let mut pts = noisy_plane(6_000, 0.01, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..4_000 {
        let x = rng.random_range(-10.0..10.0);
        let y = rng.random_range(-10.0..10.0);
        pts.push([x, y, rng.random_range(-20.0..20.0)]);
    }
    let opts = PlaneFitOptions { inlier_tol: 0.05, seed: 5, ..PlaneFitOptions::default() };
    let pose = fit_plane(&pts, &opts).unwrap();
    let err = angle_deg(pose.normal(), [-0.1, -0.05, 1.0]);
    assert!(err < 1.0, "normal error {err} deg");
    assert!(pose.inlier_fraction > 0.55 && pose.inlier_fraction < 0.65);
    // same seed, same pose
    assert_eq!(fit_plane(&pts, &opts).unwrap(), pose);
}

#[test]
fn too_few_inliers_is_degenerate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts: Vec<[f64; 3]> =
        (0..500).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-50.0..50.0)]).collect();
    let opts = PlaneFitOptions { inlier_tol: 0.01, ..PlaneFitOptions::default() };
    assert!(fit_plane(&pts, &opts).is_err());
}

#[test]
fn pose_transforms() {
    let pts = vec![[1.0, 2.0, 3.0], [-4.0, 0.5, 9.0]];
    assert_eq!(to_global(&pts, &PlanePose::identity()), pts);
    let shift = PlanePose { t_g: [0.0, 0.0, -5.0], ..PlanePose::identity() };
    let moved = to_global(&pts, &shift);
    assert_eq!(moved[0], [1.0, 2.0, -2.0]);
    let fitted = fit_plane(&noisy_plane(500, 0.0, 8), &PlaneFitOptions::default()).unwrap();
    let back = to_camera(&to_global(&pts, &fitted), &fitted);
    for (a, b) in back.iter().zip(&pts) {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }
}

fn rotation(ax: f64, ay: f64, az: f64) -> [[f64; 3]; 3] {
    let (sx, cx) = ax.sin_cos();
    let (sy, cy) = ay.sin_cos();
    let (sz, cz) = az.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
    };
    mul(rz, mul(ry, rx))
}

#[test]
fn fit_is_invariant_to_rigid_pretransform() {
    let pts = noisy_plane(3_000, 0.01, 12);
    let opts = PlaneFitOptions { seed: 21, ..PlaneFitOptions::default() };
    let pose = fit_plane(&pts, &opts).unwrap();
    let z0: Vec<f64> = to_global(&pts, &pose).iter().map(|p| p[2]).collect();
    // small rigid motions that keep the camera on the same side of the plane
    for (k, (ax, ay, az, t)) in [(0.05, -0.1, 0.7, [0.3, -1.0, 0.5]), (-0.2, 0.1, -1.2, [2.0, 0.0, -0.4])].iter().enumerate() {
        let pre = PlanePose { r_g: rotation(*ax, *ay, *az), t_g: *t, inlier_fraction: 1.0 };
        let moved = to_global(&pts, &pre);
        let pose2 = fit_plane(&moved, &opts).unwrap();
        let z: Vec<f64> = to_global(&moved, &pose2).iter().map(|p| p[2]).collect();
        for (a, b) in z.iter().zip(&z0) {
            assert!((a - b).abs() < 1e-9, "transform {k}: {a} vs {b}");
        }
    }
}

fn rig() -> StereoRig {
    let cam = CameraIntrinsics { fx: 1200.0, fy: 1200.0, cx: 320.0, cy: 240.0, width: 640, height: 480 };
    StereoRig::rectified(cam, 2.03)
}

#[test]
fn plane_disparity_triangulates_to_a_plane() {
    let rig = rig();
    let g = Grid2D::new(160, 120, 4.0, 4.0, 0.0, 0.0).unwrap();
    // oblique view of a water plane 20 m away
    let normal = [0.0, -0.6, -0.8];
    let d = plane_disparity(&rig, g, [0.0, 0.0, 20.0], normal);
    assert_eq!(d.valid_count(), g.len());
    let cloud = triangulate(&d, &rig).unwrap();
    let rms = (cloud
        .valid_points()
        .iter()
        .map(|p| (normal[0] * p[0] + normal[1] * p[1] + normal[2] * (p[2] - 20.0)).powi(2))
        .sum::<f64>()
        / g.len() as f64)
        .sqrt();
    assert!(rms < 1e-9, "rms plane distance {rms}");
}

#[test]
fn triangulate_fit_global_round_trip() {
    let rig = rig();
    let g = Grid2D::new(160, 120, 4.0, 4.0, 0.0, 0.0).unwrap();
    let d = plane_disparity(&rig, g, [0.0, 0.0, 20.0], [0.0, -0.6, -0.8]);
    let cloud = triangulate(&d, &rig).unwrap();
    let opts = PlaneFitOptions { inlier_tol: 0.02, seed: 1, ..PlaneFitOptions::default() };
    let pose = fit_plane(&cloud.valid_points(), &opts).unwrap();
    let global = to_global(&cloud.valid_points(), &pose);
    let mean_z = global.iter().map(|p| p[2]).sum::<f64>() / global.len() as f64;
    assert!(mean_z.abs() < opts.inlier_tol, "mean Z {mean_z}");
    // the plane faces the camera: the camera centre is above the water
    assert!(pose.apply([0.0; 3])[2] > 0.0);
    // gridding the flat global cloud gives a flat surface
    let xs: Vec<f64> = global.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = global.iter().map(|p| p[1]).collect();
    let (xmin, ymin) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::INFINITY, f64::min));
    let eta = project_eta(&global, Grid2D::new(20, 20, 0.25, 0.25, xmin + 2.0, ymin + 2.0).unwrap());
    assert!(eta.valid_count() > 300);
    for k in 0..eta.values.len() {
        if eta.is_valid(k) {
            assert!(eta.values[k].abs() < 1e-9);
        }
    }
}
