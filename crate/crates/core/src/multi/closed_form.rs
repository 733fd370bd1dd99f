//! Closed-form calibration from three or more images.
//!
//! The stacked system is solved as a weighted least-squares problem in
//! normalized pixel coordinates. Rows are first scaled to unit norm, then
//! reweighted per constraint type by the inverse RMS of that type's residual,
//! because the six constraint types carry very different noise levels.

use nalgebra::{DMatrix, DVector, Matrix3};

use super::{
    build_linear_system_from_matrices, equilibrated_singular_values, numerical_rank,
    LinearSystem, SphericalExtrinsics, ROWS_PER_IMAGE,
};
use crate::geom::{decompose_homography, CameraIntrinsics, Homography, ObservationSet};
use crate::{Error, Result};

const RANK_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormOptions {
    /// Base image for the scale ratios; the image with the most points when `None`.
    pub base_index: Option<usize>,
    /// Rounds of per-constraint-type residual reweighting.
    pub reweight_rounds: usize,
}

impl Default for ClosedFormOptions {
    fn default() -> Self {
        Self {
            base_index: None,
            reweight_rounds: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormSolution {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: SphericalExtrinsics,
    pub homographies: Vec<Homography>,
    pub base_index: usize,
    /// Column-equilibrated singular values of the weighted system, descending.
    pub singular_values: Vec<f64>,
}

/// Intrinsics and spherical motion from at least three images.
pub fn solve_closed_form(obs: &ObservationSet) -> Result<(CameraIntrinsics, SphericalExtrinsics)> {
    let s = solve_closed_form_with(obs, &ClosedFormOptions::default())?;
    Ok((s.intrinsics, s.extrinsics))
}

pub fn solve_closed_form_with(
    obs: &ObservationSet,
    options: &ClosedFormOptions,
) -> Result<ClosedFormSolution> {
    if obs.len() < 3 {
        return Err(Error::Precondition(format!(
            "closed-form calibration needs at least 3 images, got {}",
            obs.len()
        )));
    }
    let base = options.base_index.unwrap_or_else(|| obs.base_index());
    let homographies = obs.homographies()?;
    let t = obs.pixel_normalization();
    let raw: Vec<Matrix3<f64>> = homographies.iter().map(|h| *h.matrix()).collect();
    let (k, (x, y, r), sv) = solve_matrices(&raw, base, &t, options.reweight_rounds)?;
    let rotations = homographies
        .iter()
        .map(|h| decompose_homography(h, &k).rotation)
        .collect();
    Ok(ClosedFormSolution {
        intrinsics: k,
        extrinsics: SphericalExtrinsics::new(x, y, r, rotations)?,
        homographies,
        base_index: base,
        singular_values: sv,
    })
}

type Decoded = (CameraIntrinsics, (f64, f64, f64), Vec<f64>);

/// Solves from raw homography matrices (any scale) given a pixel normalization `t`.
pub(crate) fn solve_matrices(
    hs: &[Matrix3<f64>],
    base: usize,
    t: &Matrix3<f64>,
    rounds: usize,
) -> Result<Decoded> {
    let normalized: Vec<Matrix3<f64>> = hs.iter().map(|h| t * h).collect();
    let sys = build_linear_system_from_matrices(&normalized, base)?;

    let mut weights = row_norm_weights(&sys);
    for _ in 0..rounds {
        let (sol, _) = weighted_solve(&sys, &weights)?;
        let resid = &sys.d * &sol - &sys.b;
        let mut type_rms = [0.0; ROWS_PER_IMAGE];
        for (row, r) in resid.iter().enumerate() {
            type_rms[row % ROWS_PER_IMAGE] += (r * weights[row]).powi(2);
        }
        let images = (sys.b.len() / ROWS_PER_IMAGE) as f64;
        let type_rms = type_rms.map(|s| (s / images).sqrt());
        // Exact data leaves nothing to reweight by.
        if type_rms.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            break;
        }
        for (row, w) in weights.iter_mut().enumerate() {
            *w /= type_rms[row % ROWS_PER_IMAGE];
        }
    }
    let (sol, sv) = weighted_solve(&sys, &weights)?;

    let (w11, w12, w13, w22, w23) = (sol[0], sol[1], sol[2], sol[3], sol[4]);
    let (cx, cy) = (w13, w23);
    let fy2 = w22 - cy * cy;
    if !(fy2 > 0.0) {
        return Err(Error::NegativeRadicand("fy"));
    }
    let fy = fy2.sqrt();
    let gamma = (w12 - cx * cy) / fy;
    let fx2 = w11 - cx * cx - gamma * gamma;
    if !(fx2 > 0.0) {
        return Err(Error::NegativeRadicand("fx"));
    }
    let kn = Matrix3::new(fx2.sqrt(), gamma, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
    let t_inv = t.try_inverse().ok_or(Error::SingularHomography)?;
    let k = CameraIntrinsics::from_matrix(&(t_inv * kn))?;

    let a = &sol.as_slice()[5..];
    let (a11, a13, a23, a33) = (a[0], a[2], a[4], a[5]);
    if a33 == 0.0 {
        return Err(Error::NegativeRadicand("r"));
    }
    let x = a13 / a33;
    let y = a23 / a33;
    let r2 = a11 / a33 - x * x;
    if !(r2 > 0.0) {
        return Err(Error::NegativeRadicand("r"));
    }
    Ok((k, (x, y, r2.sqrt()), sv))
}

fn row_norm_weights(sys: &LinearSystem) -> Vec<f64> {
    (0..sys.d.nrows())
        .map(|i| {
            let n2 = sys.d.row(i).columns(0, 5).norm_squared() + sys.b[i] * sys.b[i];
            if n2 > 0.0 {
                1.0 / n2.sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

/// Column-equilibrated least squares. Returns the solution and the
/// equilibrated singular values.
fn weighted_solve(sys: &LinearSystem, weights: &[f64]) -> Result<(DVector<f64>, Vec<f64>)> {
    let mut d = sys.d.clone();
    let mut b = sys.b.clone();
    for (i, w) in weights.iter().enumerate() {
        d.row_mut(i).scale_mut(*w);
        b[i] *= w;
    }
    let sv = equilibrated_singular_values(&d);
    let rank = numerical_rank(&sv, RANK_CUTOFF);
    if rank < 11 {
        return Err(Error::RankDeficient { rank, required: 11 });
    }
    let scales: Vec<f64> = d.column_iter().map(|c| c.norm()).collect();
    let mut de = d;
    for (mut col, s) in de.column_iter_mut().zip(&scales) {
        col /= *s;
    }
    let sol = solve_lstsq(de, &b)?;
    Ok((
        DVector::from_iterator(11, sol.iter().zip(&scales).map(|(v, s)| v / s)),
        sv,
    ))
}

fn solve_lstsq(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd(true, true);
    svd.solve(b, 0.0)
        .map_err(|e| Error::DegenerateConfiguration(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rotation;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn nominal_k() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 542.0, 478.0, 0.01).unwrap()
    }

    fn homographies(ws: &[[f64; 3]]) -> Vec<Matrix3<f64>> {
        let ext = SphericalExtrinsics::new(
            150.0,
            105.0,
            700.0,
            ws.iter().map(|w| Rotation::exp(&Vector3::from(*w))).collect(),
        )
        .unwrap();
        (0..ws.len())
            .map(|i| nominal_k().matrix() * ext.motion_matrix(i))
            .collect()
    }

    const POSES: [[f64; 3]; 4] = [
        [0.1, 0.2, 0.0],
        [-0.2, 0.1, 0.3],
        [0.05, -0.25, -0.1],
        [0.3, 0.0, 0.2],
    ];

    #[test]
    fn exact_homographies_give_exact_solution() {
        let hs = homographies(&POSES);
        let (k, (x, y, r), _) = solve_matrices(&hs, 0, &Matrix3::identity(), 2).unwrap();
        for (a, b) in k.to_array().iter().zip(nominal_k().to_array()) {
            assert_relative_eq!(*a, b, max_relative = 1e-7);
        }
        assert_relative_eq!(x, 150.0, epsilon = 1e-6);
        assert_relative_eq!(y, 105.0, epsilon = 1e-6);
        assert_relative_eq!(r, 700.0, epsilon = 1e-6);
    }

    #[test]
    fn homography_scale_does_not_matter() {
        let hs = homographies(&POSES);
        let scaled: Vec<_> = hs
            .iter()
            .zip([1.0, -3.0, 0.01, 42.0])
            .map(|(h, s)| h * s)
            .collect();
        let (k0, ..) = solve_matrices(&hs, 0, &Matrix3::identity(), 0).unwrap();
        let (k1, ..) = solve_matrices(&scaled, 0, &Matrix3::identity(), 0).unwrap();
        for (a, b) in k0.to_array().iter().zip(k1.to_array()) {
            assert_relative_eq!(*a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn z_rotation_family_is_rank_deficient() {
        let base = Rotation::exp(&Vector3::new(0.2, -0.1, 0.0));
        let ws: Vec<[f64; 3]> = [0.0, 0.4, -0.7]
            .iter()
            .map(|&a| {
                let w = (base * Rotation::about_z(a)).log();
                [w.x, w.y, w.z]
            })
            .collect();
        let hs = homographies(&ws);
        assert!(matches!(
            solve_matrices(&hs, 0, &Matrix3::identity(), 2),
            Err(Error::RankDeficient { .. })
        ));
    }
}
