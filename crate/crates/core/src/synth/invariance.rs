//! Numerical checks of the spherical motion model: angle invariance, the
//! fixed camera-to-target distance, and the uniqueness of the orthogonal
//! viewpoint.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::geom::angular_distance;
use crate::multi::SphericalExtrinsics;
use crate::refine::{lm_minimize, RefinementConfig};
use crate::{Error, Result};

/// Relative tolerance for merging roots and for the admissibility boundary.
pub const ROOT_TOLERANCE: f64 = 1e-6;

/// Largest minus smallest angle subtended by target points `a` and `b`
/// across all images.
pub fn pair_angle_spread(ext: &SphericalExtrinsics, a: &Vector3<f64>, b: &Vector3<f64>) -> Result<f64> {
    let c = ext.center();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for rot in &ext.rotations {
        let angle = angular_distance(&rot.apply(&(a - c)), &rot.apply(&(b - c)))?;
        lo = lo.min(angle);
        hi = hi.max(angle);
    }
    Ok(hi - lo)
}

/// Largest deviation of the target origin's camera-frame distance from
/// `|t_cp|` across all images.
pub fn sphere_deviation(ext: &SphericalExtrinsics) -> f64 {
    let radius = ext.center().norm();
    (0..ext.rotations.len())
        .map(|i| (ext.translation(i).norm() - radius).abs())
        .fold(0.0, f64::max)
}

/// Three mutually orthogonal directions from the origin to points at height
/// `r` above it, spaced 120 degrees apart in azimuth.
pub fn orthogonal_triplet(r: f64) -> [Vector3<f64>; 3] {
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    [
        Vector3::new(s2 * r, 0.0, r),
        Vector3::new(-s2 / 2.0 * r, s6 / 2.0 * r, r),
        Vector3::new(-s2 / 2.0 * r, -s6 / 2.0 * r, r),
    ]
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];

/// `(P_i + t) . (P_j + t) / r^2` for the three pairs: zero exactly when the
/// points seen from `-t` are mutually orthogonal.
pub fn orthogonality_residuals(points: &[Vector3<f64>; 3], r: f64, t: &Vector3<f64>) -> Vector3<f64> {
    Vector3::from_fn(|k, _| {
        let (i, j) = PAIRS[k];
        (points[i] + t).dot(&(points[j] + t)) / (r * r)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalitySearch {
    pub radius: f64,
    /// Distinct real solutions found anywhere in the search box.
    pub roots: Vec<Vector3<f64>>,
    /// Solutions with `t.z > -2r`.
    pub admissible: Vec<Vector3<f64>>,
    /// Residual norm at `t = 0`.
    pub residual_at_origin: f64,
}

impl OrthogonalitySearch {
    /// True when the origin is the only admissible solution.
    pub fn origin_is_unique(&self) -> bool {
        self.admissible.len() == 1 && self.admissible[0].norm() <= ROOT_TOLERANCE * self.radius
    }
}

/// Finds every offset `t` in `[-3r, 3r]^3` that keeps the triplet mutually
/// orthogonal, by least-squares refinement from each node of a `grid^3`
/// lattice. Solutions within [`ROOT_TOLERANCE`] of the `z = -2r` boundary
/// are not admissible.
pub fn search_orthogonal_offsets(r: f64, grid: usize) -> Result<OrthogonalitySearch> {
    let points = orthogonal_triplet(r);
    let config = RefinementConfig {
        cauchy_scale: f64::INFINITY,
        max_iterations: 200,
        gradient_tolerance: 1e-30,
        parameter_tolerance: 1e-16,
        ..Default::default()
    };
    let residual = |x: &DVector<f64>| {
        let t = Vector3::new(x[0], x[1], x[2]) * r;
        DVector::from_column_slice(orthogonality_residuals(&points, r, &t).as_slice())
    };
    let jacobian = |x: &DVector<f64>| {
        let t = Vector3::new(x[0], x[1], x[2]) * r;
        DMatrix::from_fn(3, 3, |k, c| {
            let (i, j) = PAIRS[k];
            (points[i][c] + points[j][c] + 2.0 * t[c]) / r
        })
    };
    let mut roots: Vec<Vector3<f64>> = Vec::new();
    let step = if grid > 1 { 6.0 / (grid - 1) as f64 } else { 0.0 };
    for ix in 0..grid {
        for iy in 0..grid {
            for iz in 0..grid {
                let x0 = DVector::from_vec(vec![
                    -3.0 + step * ix as f64,
                    -3.0 + step * iy as f64,
                    -3.0 + step * iz as f64,
                ]);
                // Symmetric start nodes can zero a Jacobian column; they
                // add nothing the neighbouring nodes do not reach.
                let x = match lm_minimize(residual, jacobian, x0, &config) {
                    Ok((x, _)) => x,
                    Err(Error::JacobianRankCollapse(_)) => continue,
                    Err(e) => return Err(e),
                };
                if residual(&x).norm() > 1e-10 {
                    continue;
                }
                let t = Vector3::new(x[0], x[1], x[2]) * r;
                if !roots.iter().any(|s| (s - t).norm() <= ROOT_TOLERANCE * r) {
                    roots.push(t);
                }
            }
        }
    }
    roots.sort_by(|a, b| b.z.total_cmp(&a.z));
    let admissible = roots
        .iter()
        .copied()
        .filter(|t| t.z > -2.0 * r + ROOT_TOLERANCE * r)
        .collect();
    Ok(OrthogonalitySearch {
        radius: r,
        roots,
        admissible,
        residual_at_origin: orthogonality_residuals(&points, r, &Vector3::zeros()).norm(),
    })
}
