use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};

use super::{CameraIntrinsics, Rotation};
use crate::{Error, Result};

/// Plane-to-image homography, stored with Frobenius norm `sqrt(3)` and a
/// non-negative bottom-right entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    /// Normalizes `m` and checks that it is full rank.
    pub fn new(m: &Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularHomography);
        }
        let sv = m.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if !(hi > 0.0) || lo / hi <= 1e-10 {
            return Err(Error::SingularHomography);
        }
        let mut h = m * (3f64.sqrt() / m.norm());
        if h[(2, 2)] < 0.0 {
            h = -h;
        }
        Ok(Self(h))
    }

    /// `K [r1 r2 t]` for the pose `Pc = R P + t`.
    pub fn from_pose(k: &CameraIntrinsics, r: &Rotation, t: &Vector3<f64>) -> Result<Self> {
        Self::new(&pose_matrix(k, r, t))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        self.0.try_inverse().expect("full rank by construction")
    }

    /// Maps a target-plane point to pixels.
    pub fn transfer(&self, xy: &Vector2<f64>) -> Vector2<f64> {
        let p = self.0 * Vector3::new(xy.x, xy.y, 1.0);
        Vector2::new(p.x / p.z, p.y / p.z)
    }

    /// Frobenius distance to `other` after matching scale and sign.
    pub fn distance(&self, other: &Homography) -> f64 {
        let a = self.0 / self.0.norm();
        let b = other.0 / other.0.norm();
        (a - b).norm().min((a + b).norm())
    }
}

/// Unnormalized `K [r1 r2 t]`.
pub fn pose_matrix(k: &CameraIntrinsics, r: &Rotation, t: &Vector3<f64>) -> Matrix3<f64> {
    let rm = r.matrix();
    let mut m = Matrix3::zeros();
    m.set_column(0, &rm.column(0));
    m.set_column(1, &rm.column(1));
    m.set_column(2, t);
    k.matrix() * m
}

/// Similarity taking `points` to zero centroid and mean distance `sqrt(2)`.
pub fn hartley_normalization(points: &[Vector2<f64>]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let c = points.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let mean_dist = points.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    if !(mean_dist > 0.0) {
        return Err(Error::DegenerateConfiguration("all points coincide".into()));
    }
    let s = 2f64.sqrt() / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0))
}

fn apply_affine(t: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(
        t[(0, 0)] * p.x + t[(0, 1)] * p.y + t[(0, 2)],
        t[(1, 0)] * p.x + t[(1, 1)] * p.y + t[(1, 2)],
    )
}

/// Normalized DLT over `(target XY, pixel)` pairs.
pub fn estimate_homography(correspondences: &[(Vector2<f64>, Vector2<f64>)]) -> Result<Homography> {
    let n = correspondences.len();
    if n < 4 {
        return Err(Error::Precondition(format!(
            "homography needs at least 4 correspondences, got {n}"
        )));
    }
    let src: Vec<_> = correspondences.iter().map(|c| c.0).collect();
    let dst: Vec<_> = correspondences.iter().map(|c| c.1).collect();
    let ts = hartley_normalization(&src)?;
    let td = hartley_normalization(&dst)?;

    // Zero padding keeps the full right singular basis available for four points.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let s = apply_affine(&ts, s);
        let d = apply_affine(&td, d);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * i, j)] = r0[j];
            a[(2 * i + 1, j)] = r1[j];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (smallest, second) = (order[0], order[1]);
    if sv[second] <= 1e-10 * sv.max() {
        return Err(Error::DegenerateConfiguration(
            "homography design matrix is rank deficient".into(),
        ));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().expect("similarity is invertible");
    Homography::new(&(td_inv * hn * ts)).map_err(|_| {
        Error::DegenerateConfiguration("estimated homography is singular".into())
    })
}

/// Pose recovered from a homography and known intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
    /// Scale such that `H = lambda K [r1 r2 t]`.
    pub lambda: f64,
}

/// Recovers `(R, t, lambda)` with the target in front of the camera.
pub fn decompose_homography(h: &Homography, k: &CameraIntrinsics) -> PlanarPose {
    let k_inv = k.inverse_matrix();
    let m = k_inv * h.matrix();
    let a = m.column(0).into_owned();
    let b = m.column(1).into_owned();
    let c = m.column(2).into_owned();
    let mut lambda = (a.norm() + b.norm()) / 2.0;
    if c.z < 0.0 {
        lambda = -lambda;
    }
    let r1 = a / lambda;
    let r2 = b / lambda;
    let r3 = r1.cross(&r2);
    let rotation = Rotation::nearest(&Matrix3::from_columns(&[r1, r2, r3]));
    PlanarPose {
        rotation,
        translation: c / lambda,
        lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn nominal_k() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 542.0, 478.0, 0.01).unwrap()
    }

    fn grid() -> Vec<Vector2<f64>> {
        (0..8)
            .flat_map(|r| (0..11).map(move |c| Vector2::new(30.0 * c as f64, 30.0 * r as f64)))
            .collect()
    }

    #[test]
    fn unit_square_identity() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let corr: Vec<_> = pts
            .iter()
            .map(|&(x, y)| (Vector2::new(x, y), Vector2::new(x, y)))
            .collect();
        let h = estimate_homography(&corr).unwrap();
        let id = Homography::new(&Matrix3::identity()).unwrap();
        assert!(h.distance(&id) < 1e-12);
    }

    #[test]
    fn normalization_convention() {
        let h = Homography::new(&(Matrix3::new(2.0, 0.1, 3.0, 0.0, 1.5, -1.0, 0.001, 0.0, 1.0) * -7.0))
            .unwrap();
        assert_relative_eq!(h.matrix().norm(), 3f64.sqrt(), epsilon = 1e-14);
        assert!(h.matrix()[(2, 2)] > 0.0);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert_eq!(Homography::new(&m), Err(Error::SingularHomography));
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let corr: Vec<_> = (0..6)
            .map(|i| {
                let x = i as f64;
                (Vector2::new(x, 2.0 * x), Vector2::new(x, x))
            })
            .collect();
        assert!(matches!(
            estimate_homography(&corr),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn recovers_spherical_pose() {
        let k = nominal_k();
        let r = Rotation::exp(&Vector3::new(0.2, -0.1, 0.3));
        let tcp = Vector3::new(150.0, 105.0, -700.0);
        let t = -r.apply(&tcp);
        let h_true = Homography::from_pose(&k, &r, &t).unwrap();
        let corr: Vec<_> = grid().into_iter().map(|p| (p, h_true.transfer(&p))).collect();
        let h = estimate_homography(&corr).unwrap();
        assert!(h.distance(&h_true) < 1e-10);
        let pose = decompose_homography(&h, &k);
        assert!(pose.rotation.angle_to(&r) < 1e-8);
        assert!((pose.translation - t).norm() < 1e-6);
    }

    #[test]
    fn decomposes_fronto_parallel_pose() {
        let k = nominal_k();
        let h = Homography::from_pose(&k, &Rotation::identity(), &Vector3::new(0.0, 0.0, 700.0))
            .unwrap();
        let pose = decompose_homography(&h, &k);
        assert!(pose.rotation.angle_to(&Rotation::identity()) < 1e-10);
        assert_relative_eq!(pose.translation, Vector3::new(0.0, 0.0, 700.0), epsilon = 1e-10);
    }

    #[test]
    fn decomposition_is_orthonormal_under_noise() {
        let k = nominal_k();
        let r = Rotation::exp(&Vector3::new(0.1, 0.2, -0.05));
        let h = Homography::from_pose(&k, &r, &Vector3::new(10.0, -20.0, 650.0)).unwrap();
        let noise = Matrix3::new(1.0, -2.0, 0.5, 0.3, 1.2, -0.7, 0.9, -0.4, 0.2) * 1e-6;
        let pose = decompose_homography(&Homography::new(&(h.matrix() + noise)).unwrap(), &k);
        let m = pose.rotation.matrix();
        assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-12);
    }

    proptest! {
        #[test]
        fn synthesize_and_recover(entries in proptest::array::uniform9(-1.0f64..1.0)) {
            let m = Matrix3::from_row_slice(&entries) + Matrix3::identity() * 2.0;
            let h_true = Homography::new(&m);
            prop_assume!(h_true.is_ok());
            let h_true = h_true.unwrap();
            let pts = grid();
            let corr: Vec<_> = pts.iter().map(|p| {
                let q = h_true.matrix() * Vector3::new(p.x / 300.0, p.y / 240.0, 1.0);
                (Vector2::new(p.x / 300.0, p.y / 240.0), Vector2::new(q.x / q.z, q.y / q.z))
            }).collect();
            // Skip maps that send a grid point near the line at infinity.
            prop_assume!(pts.iter().all(|p| (h_true.matrix() * Vector3::new(p.x / 300.0, p.y / 240.0, 1.0)).z.abs() > 0.05));
            let h = estimate_homography(&corr).unwrap();
            prop_assert!(h.distance(&h_true) < 1e-9);
        }
    }
}
