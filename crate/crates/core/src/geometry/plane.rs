use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::rng::indexed_substream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlaneFitOptions {
    pub ransac_iters: usize,
    /// Inlier distance, m.
    pub inlier_tol: f64,
    pub seed: u64,
    /// Minimum inlier fraction for a usable plane.
    pub min_inlier_fraction: f64,
}

impl Default for PlaneFitOptions {
    fn default() -> Self {
        Self { ransac_iters: 200, inlier_tol: 0.05, seed: 0, min_inlier_fraction: 0.2 }
    }
}

/// Rigid map from camera to global coordinates, `p' = R_g p + T_g`.
///
/// Global +Z is the plane normal oriented towards the camera, global +X is
/// camera +X projected onto the plane, and the inlier centroid lies at `Z = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanePose {
    pub r_g: [[f64; 3]; 3],
    pub t_g: [f64; 3],
    pub inlier_fraction: f64,
}

impl PlanePose {
    pub fn identity() -> Self {
        Self { r_g: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], t_g: [0.0; 3], inlier_fraction: 1.0 }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| (0..3).map(|k| self.r_g[i][k] * p[k]).sum::<f64>() + self.t_g[i])
    }

    pub fn apply_inverse(&self, p: [f64; 3]) -> [f64; 3] {
        let q: [f64; 3] = std::array::from_fn(|i| p[i] - self.t_g[i]);
        std::array::from_fn(|i| (0..3).map(|k| self.r_g[k][i] * q[k]).sum())
    }

    /// Plane normal in camera coordinates (third row of `R_g`).
    pub fn normal(&self) -> [f64; 3] {
        self.r_g[2]
    }
}

pub fn to_global(points: &[[f64; 3]], pose: &PlanePose) -> Vec<[f64; 3]> {
    points.par_iter().map(|&p| pose.apply(p)).collect()
}

pub fn to_camera(points: &[[f64; 3]], pose: &PlanePose) -> Vec<[f64; 3]> {
    points.par_iter().map(|&p| pose.apply_inverse(p)).collect()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(a: [f64; 3]) -> Option<[f64; 3]> {
    let n = dot(a, a).sqrt();
    (n > 0.0 && n.is_finite()).then(|| [a[0] / n, a[1] / n, a[2] / n])
}

/// Plane `n . p = c` through three points, `None` when they are collinear.
fn plane_through(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Option<([f64; 3], f64)> {
    let n = cross(sub(b, a), sub(c, a));
    let scale = dot(sub(b, a), sub(b, a)).max(dot(sub(c, a), sub(c, a)));
    if dot(n, n) <= 1e-24 * scale * scale {
        return None;
    }
    let n = normalize(n)?;
    Some((n, dot(n, a)))
}

fn count_inliers(points: &[[f64; 3]], n: [f64; 3], c: f64, tol: f64) -> usize {
    points.iter().filter(|p| (dot(n, **p) - c).abs() < tol).count()
}

/// Total-least-squares plane of `points`: centroid and the eigenvector of the
/// scatter matrix with the smallest eigenvalue.
fn tls_plane(points: &[[f64; 3]]) -> Option<([f64; 3], [f64; 3])> {
    let n = points.len() as f64;
    let mut centroid = [0.0; 3];
    for p in points {
        for k in 0..3 {
            centroid[k] += p[k] / n;
        }
    }
    let mut scatter = Matrix3::<f64>::zeros();
    for p in points {
        let d = Vector3::new(p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]);
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let v = eig.eigenvectors.column(imin);
    Some((normalize([v[0], v[1], v[2]])?, centroid))
}

/// RANSAC plane hypothesis followed by a total-least-squares refit on the
/// inliers. Deterministic for a given seed: iteration `i` draws from its own
/// substream.
pub fn fit_plane(points: &[[f64; 3]], options: &PlaneFitOptions) -> Result<PlanePose, GeometryError> {
    if !(options.inlier_tol > 0.0) || options.ransac_iters == 0 {
        return Err(GeometryError::InvalidParameter("ransac_iters must be >= 1 and inlier_tol > 0".into()));
    }
    let pts: Vec<[f64; 3]> = points.iter().copied().filter(|p| p.iter().all(|v| v.is_finite())).collect();
    if pts.len() < 3 {
        return Err(GeometryError::TooFewPoints(pts.len()));
    }
    let np = pts.len();
    let best = (0..options.ransac_iters)
        .into_par_iter()
        .filter_map(|it| {
            let mut rng = indexed_substream(options.seed, "ransac", it as u64);
            let i = rng.random_range(0..np);
            let mut j = rng.random_range(0..np - 1);
            if j >= i {
                j += 1;
            }
            let mut k = rng.random_range(0..np);
            while k == i || k == j {
                if np == 3 {
                    k = 3 - i - j;
                    break;
                }
                k = rng.random_range(0..np);
            }
            let (n, c) = plane_through(pts[i], pts[j], pts[k])?;
            Some((count_inliers(&pts, n, c, options.inlier_tol), it, n, c))
        })
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let Some((count, _, n, c)) = best else {
        return Err(GeometryError::DegenerateGeometry { inlier_fraction: 0.0 });
    };
    let fraction = count as f64 / np as f64;
    if fraction < options.min_inlier_fraction || count < 3 {
        return Err(GeometryError::DegenerateGeometry { inlier_fraction: fraction });
    }
    let inliers: Vec<[f64; 3]> = pts.iter().copied().filter(|p| (dot(n, *p) - c).abs() < options.inlier_tol).collect();
    let (mut normal, mut centroid) = tls_plane(&inliers).ok_or(GeometryError::DegenerateGeometry { inlier_fraction: fraction })?;
    // one re-selection with the refined plane
    let refined: Vec<[f64; 3]> = pts
        .iter()
        .copied()
        .filter(|p| (dot(normal, *p) - dot(normal, centroid)).abs() < options.inlier_tol)
        .collect();
    let mut fraction = fraction;
    if refined.len() >= 3 {
        if let Some((n2, c2)) = tls_plane(&refined) {
            normal = n2;
            centroid = c2;
            fraction = refined.len() as f64 / np as f64;
        }
    }
    Ok(pose_from_plane(normal, centroid, fraction))
}

fn pose_from_plane(normal: [f64; 3], centroid: [f64; 3], inlier_fraction: f64) -> PlanePose {
    // orient towards the camera at the origin, else upward in camera Z
    let towards = -dot(normal, centroid);
    let flip = if towards.abs() > 1e-12 * dot(centroid, centroid).sqrt().max(1.0) {
        towards < 0.0
    } else {
        normal[2] < 0.0
    };
    let n = if flip { [-normal[0], -normal[1], -normal[2]] } else { normal };
    let ex = [1.0, 0.0, 0.0];
    let proj = sub(ex, [n[0] * n[0], n[0] * n[1], n[0] * n[2]]);
    let xg = normalize(proj).unwrap_or_else(|| {
        // camera X parallel to the normal: fall back to camera Y
        normalize(sub([0.0, 1.0, 0.0], [n[1] * n[0], n[1] * n[1], n[1] * n[2]])).expect("normal is a unit vector")
    });
    let yg = cross(n, xg);
    let r_g = [xg, yg, n];
    let z = dot(n, centroid);
    PlanePose { r_g, t_g: [0.0, 0.0, -z], inlier_fraction }
}
