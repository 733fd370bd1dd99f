//! Plane-based calibration without any motion constraint, used as the
//! comparison baseline.

use nalgebra::{DMatrix, Matrix3, RowVector6};

use crate::geom::{decompose_homography, CameraIntrinsics, Homography, ObservationSet};
use crate::multi::{decompose_iac, equilibrated_singular_values, numerical_rank, IacVector};
use crate::refine::PlanarPoseEstimate;
use crate::{Error, Result};

const RANK_CUTOFF: f64 = 1e-8;

/// Coefficients of `h_i^T Q h_j` over `(Q11, Q12, Q13, Q22, Q23, Q33)`.
fn conic_coefficients(h: &Matrix3<f64>, i: usize, j: usize) -> RowVector6<f64> {
    let a = h.column(i);
    let b = h.column(j);
    RowVector6::new(
        a[0] * b[0],
        a[0] * b[1] + a[1] * b[0],
        a[0] * b[2] + a[2] * b[0],
        a[1] * b[1],
        a[1] * b[2] + a[2] * b[1],
        a[2] * b[2],
    )
}

/// Intrinsics from the orthonormality of the first two rotation columns of
/// every image: two linear constraints per homography on the image of the
/// absolute conic.
pub fn zhang_init(obs: &ObservationSet) -> Result<CameraIntrinsics> {
    if obs.len() < 3 {
        return Err(Error::Precondition(format!(
            "plane-based initialization needs at least 3 images, got {}",
            obs.len()
        )));
    }
    zhang_from_homographies(&obs.homographies()?, &obs.pixel_normalization())
}

/// As [`zhang_init`], from precomputed homographies. `t` is an affine pixel
/// normalization applied before solving.
pub fn zhang_from_homographies(hs: &[Homography], t: &Matrix3<f64>) -> Result<CameraIntrinsics> {
    let mut v = DMatrix::zeros(2 * hs.len(), 6);
    for (n, h) in hs.iter().enumerate() {
        let hn = t * h.matrix();
        let hn = hn / hn.norm();
        let rows = [
            conic_coefficients(&hn, 0, 1),
            conic_coefficients(&hn, 0, 0) - conic_coefficients(&hn, 1, 1),
        ];
        for (k, row) in rows.iter().enumerate() {
            let norm = row.norm();
            let row = if norm > 0.0 { row / norm } else { *row };
            v.row_mut(2 * n + k).copy_from(&row);
        }
    }
    let sv = equilibrated_singular_values(&v);
    let rank = numerical_rank(&sv, RANK_CUTOFF);
    if rank < 5 {
        return Err(Error::RankDeficient { rank, required: 5 });
    }
    let svd = v.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("six singular values");
    let q = v_t.row(idx);
    let iac = IacVector([q[0], q[1], q[2], q[3], q[4], q[5]]);
    let kn = decompose_iac(&iac)?;
    let t_inv = t.try_inverse().ok_or(Error::SingularHomography)?;
    CameraIntrinsics::from_matrix(&(t_inv * kn.matrix()))
}

/// Free 6-DOF poses from each homography and known intrinsics.
pub fn planar_poses(obs: &ObservationSet, k: &CameraIntrinsics) -> Result<Vec<PlanarPoseEstimate>> {
    obs.homographies()?
        .iter()
        .map(|h| {
            let p = decompose_homography(h, k);
            Ok(PlanarPoseEstimate {
                rotation: p.rotation,
                translation: p.translation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Distortion, Rotation};
    use crate::synth::{generate_scene, SceneSeed, SyntheticConfig};
    use nalgebra::Vector3;

    fn noiseless() -> SyntheticConfig {
        SyntheticConfig {
            pixel_noise_sigma: 0.0,
            distortion: Distortion::zero(),
            ..Default::default()
        }
    }

    #[test]
    fn recovers_noiseless_intrinsics() {
        let scene = generate_scene(&noiseless(), SceneSeed::new(11, 0)).unwrap();
        let k = zhang_init(&scene.observations).unwrap();
        let t = scene.intrinsics;
        assert!((k.fx / t.fx - 1.0).abs() < 1e-6);
        assert!((k.fy / t.fy - 1.0).abs() < 1e-6);
        assert!((k.cx / t.cx - 1.0).abs() < 1e-6);
        assert!((k.cy / t.cy - 1.0).abs() < 1e-6);
        assert!((k.gamma - t.gamma).abs() < 1e-6 * t.fx);
    }

    #[test]
    fn z_rotations_are_rank_deficient() {
        let c = noiseless();
        let k = c.intrinsics;
        let base = Rotation::exp(&Vector3::new(0.2, -0.1, 0.0));
        let hs: Vec<_> = [0.0, 0.7, 1.9]
            .iter()
            .map(|&a| {
                let r = base * Rotation::about_z(a);
                Homography::from_pose(&k, &r, &-r.apply(&c.center())).unwrap()
            })
            .collect();
        assert!(matches!(
            zhang_from_homographies(&hs, &Matrix3::identity()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn poses_match_generator() {
        let scene = generate_scene(&noiseless(), SceneSeed::new(11, 1)).unwrap();
        let poses = planar_poses(&scene.observations, &scene.intrinsics).unwrap();
        let ext = scene.extrinsics();
        for (i, p) in poses.iter().enumerate() {
            assert!(p.rotation.angle_to(&ext.rotations[i]) < 1e-8);
            assert!((p.translation - ext.translation(i)).norm() < 1e-6);
        }
    }
}
