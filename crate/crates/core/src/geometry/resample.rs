use crate::field::{Grid2D, ScalarField};

/// Inverse-distance (power 2) gridding of global-frame points onto `grid`.
///
/// Each node averages the points strictly closer than one cell
/// (`max(dx, dy)`); a point on a node is passed through unchanged, and nodes
/// with no point in range are invalid.
pub fn project_eta(points: &[[f64; 3]], grid: Grid2D) -> ScalarField {
    let n = grid.len();
    let radius = grid.dx.max(grid.dy);
    let exact_tol = 1e-12 * radius;
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    let mut exact_sum = vec![0.0; n];
    let mut exact_count = vec![0u32; n];
    for p in points {
        if !p.iter().all(|v| v.is_finite()) {
            continue;
        }
        let fx = (p[0] - grid.x0) / grid.dx;
        let fy = (p[1] - grid.y0) / grid.dy;
        let rx = radius / grid.dx;
        let ry = radius / grid.dy;
        let i0 = (fx - rx).ceil().max(0.0);
        let i1 = (fx + rx).floor().min((grid.nx - 1) as f64);
        let j0 = (fy - ry).ceil().max(0.0);
        let j1 = (fy + ry).floor().min((grid.ny - 1) as f64);
        if i0 > i1 || j0 > j1 {
            continue;
        }
        for j in j0 as usize..=j1 as usize {
            for i in i0 as usize..=i1 as usize {
                let dx = p[0] - grid.x(i);
                let dy = p[1] - grid.y(j);
                let d2 = dx * dx + dy * dy;
                if d2 >= radius * radius {
                    continue;
                }
                let idx = grid.index(i, j);
                if d2 <= exact_tol * exact_tol {
                    exact_sum[idx] += p[2];
                    exact_count[idx] += 1;
                } else {
                    num[idx] += p[2] / d2;
                    den[idx] += 1.0 / d2;
                }
            }
        }
    }
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    for k in 0..n {
        if exact_count[k] > 0 {
            values[k] = exact_sum[k] / f64::from(exact_count[k]);
            mask[k] = true;
        } else if den[k] > 0.0 {
            values[k] = num[k] / den[k];
            mask[k] = true;
        }
    }
    ScalarField { grid, values, mask: None }.with_mask(mask).expect("mask matches grid")
}
