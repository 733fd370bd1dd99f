//! Pinhole intrinsics, two-term radial distortion, projection and back-projection.
//!
//! Distortion is a forward model: it maps ideal normalized coordinates to
//! distorted normalized coordinates before the intrinsic matrix is applied.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::Rotation;
use crate::{Error, Result};

const UNDISTORT_MAX_ITERATIONS: usize = 20;
const UNDISTORT_TOLERANCE: f64 = 1e-12;

/// Upper-triangular intrinsic matrix `[[fx, gamma, cx], [0, fy, cy], [0, 0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Skew, in pixels.
    pub gamma: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, gamma: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.fx, self.fy, self.cx, self.cy, self.gamma];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("intrinsics must be finite".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    /// Reads an upper-triangular matrix, normalizing so the bottom-right entry is 1.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let s = m[(2, 2)];
        if s == 0.0 || !s.is_finite() {
            return Err(Error::InvalidInput("intrinsic matrix has zero scale".into()));
        }
        let m = m / s;
        Self::new(m[(0, 0)], m[(1, 1)], m[(0, 2)], m[(1, 2)], m[(0, 1)])
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, self.gamma, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let (fx, fy, cx, cy, g) = (self.fx, self.fy, self.cx, self.cy, self.gamma);
        Matrix3::new(
            1.0 / fx,
            -g / (fx * fy),
            (g * cy - cx * fy) / (fx * fy),
            0.0,
            1.0 / fy,
            -cy / fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Pixel to normalized image coordinates (no distortion handling).
    pub fn normalize(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let y = (p.y - self.cy) / self.fy;
        let x = (p.x - self.cx - self.gamma * y) / self.fx;
        Vector2::new(x, y)
    }

    /// Normalized image coordinates to pixel.
    pub fn denormalize(&self, n: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(
            self.fx * n.x + self.gamma * n.y + self.cx,
            self.fy * n.y + self.cy,
        )
    }

    /// Parameters in the order `[fx, fy, cx, cy, gamma]`.
    pub fn to_array(&self) -> [f64; 5] {
        [self.fx, self.fy, self.cx, self.cy, self.gamma]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            fx: a[0],
            fy: a[1],
            cx: a[2],
            cy: a[3],
            gamma: a[4],
        }
    }
}

/// Radial distortion `x_d = x (1 + d1 r^2 + d2 r^4)` in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distortion {
    pub d1: f64,
    pub d2: f64,
}

impl Distortion {
    pub fn new(d1: f64, d2: f64) -> Self {
        Self { d1, d2 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds the model and checks that the forward map is monotone in radius
    /// out to the farthest image corner.
    pub fn checked(
        d1: f64,
        d2: f64,
        k: &CameraIntrinsics,
        image_size: (f64, f64),
    ) -> Result<Self> {
        let d = Self::new(d1, d2);
        d.check_monotone(d.max_image_radius(k, image_size))?;
        Ok(d)
    }

    fn max_image_radius(&self, k: &CameraIntrinsics, (w, h): (f64, f64)) -> f64 {
        [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
            .iter()
            .map(|&(u, v)| k.normalize(&Vector2::new(u, v)).norm())
            .fold(0.0, f64::max)
    }

    /// Verifies `d/dr [r k(r)] > 0` for every ideal radius whose distorted
    /// radius stays within `max_distorted_radius`.
    pub fn check_monotone(&self, max_distorted_radius: f64) -> Result<()> {
        if !(self.d1.is_finite() && self.d2.is_finite()) {
            return Err(Error::InvalidInput("distortion must be finite".into()));
        }
        let steps = 2000;
        let r_limit = 4.0 * max_distorted_radius.max(1e-6);
        for i in 0..=steps {
            let r = r_limit * i as f64 / steps as f64;
            let r2 = r * r;
            let slope = 1.0 + 3.0 * self.d1 * r2 + 5.0 * self.d2 * r2 * r2;
            if slope <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "distortion ({}, {}) folds over at normalized radius {r:.4}",
                    self.d1, self.d2
                )));
            }
            if r * self.factor(r2) >= max_distorted_radius {
                return Ok(());
            }
        }
        Err(Error::InvalidInput(format!(
            "distortion ({}, {}) never reaches the image boundary",
            self.d1, self.d2
        )))
    }

    #[inline]
    pub fn factor(&self, r2: f64) -> f64 {
        1.0 + self.d1 * r2 + self.d2 * r2 * r2
    }

    pub fn is_zero(&self) -> bool {
        self.d1 == 0.0 && self.d2 == 0.0
    }

    pub fn distort(&self, n: &Vector2<f64>) -> Vector2<f64> {
        n * self.factor(n.norm_squared())
    }

    /// Inverts [`Self::distort`] by fixed-point iteration.
    pub fn undistort(&self, nd: &Vector2<f64>) -> Result<Vector2<f64>> {
        if self.is_zero() {
            return Ok(*nd);
        }
        let mut x = *nd;
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let next = nd / self.factor(x.norm_squared());
            if !next.iter().all(|v| v.is_finite()) {
                break;
            }
            let delta = (next - x).norm();
            x = next;
            if delta < UNDISTORT_TOLERANCE {
                return Ok(x);
            }
        }
        Err(Error::UndistortionDiverged {
            iterations: UNDISTORT_MAX_ITERATIONS,
        })
    }
}

/// Projects a camera-frame point to pixels.
pub fn project_camera_point(
    k: &CameraIntrinsics,
    d: &Distortion,
    pc: &Vector3<f64>,
) -> Result<Vector2<f64>> {
    if !(pc.z > 0.0) {
        return Err(Error::PointBehindCamera { depth: pc.z });
    }
    let n = Vector2::new(pc.x / pc.z, pc.y / pc.z);
    Ok(k.denormalize(&d.distort(&n)))
}

/// Projects a target point through the pose `(R, t)`: `Pc = R P + t`.
pub fn project(
    k: &CameraIntrinsics,
    d: &Distortion,
    r: &Rotation,
    t: &Vector3<f64>,
    p: &Vector3<f64>,
) -> Result<Vector2<f64>> {
    project_camera_point(k, d, &(r.apply(p) + t))
}

/// Unit direction of the ray imaged at pixel `p`.
pub fn back_project(k: &CameraIntrinsics, d: &Distortion, p: &Vector2<f64>) -> Result<Vector3<f64>> {
    let n = d.undistort(&k.normalize(p))?;
    Ok(Vector3::new(n.x, n.y, 1.0).normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn nominal_k() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 542.0, 478.0, 0.01).unwrap()
    }

    #[test]
    fn optical_axis_point_hits_principal_point() {
        let k = nominal_k();
        let d = Distortion::new(0.1, -0.2);
        let uv = project(
            &k,
            &d,
            &Rotation::identity(),
            &Vector3::new(0.0, 0.0, 700.0),
            &Vector3::zeros(),
        )
        .unwrap();
        assert_eq!(uv, Vector2::new(542.0, 478.0));
    }

    #[test]
    fn projection_matches_independent_evaluation() {
        // Target frame origin shifted so the camera sits at (150, 105, -700):
        // camera point = (30 - 150, 0 - 105, 700). Expected pixel computed by an
        // independent scalar evaluation of the pinhole and polynomial chain.
        let k = nominal_k();
        let d = Distortion::new(0.1, -0.2);
        let uv = project(
            &k,
            &d,
            &Rotation::identity(),
            &Vector3::new(-150.0, -105.0, 700.0),
            &Vector3::new(30.0, 0.0, 0.0),
        )
        .unwrap();
        assert_relative_eq!(uv.x, 369.7727259929445, epsilon = 1e-9);
        assert_relative_eq!(uv.y, 327.3024538473553, epsilon = 1e-9);
    }

    #[test]
    fn depth_must_be_positive() {
        let k = nominal_k();
        let err = project(
            &k,
            &Distortion::zero(),
            &Rotation::identity(),
            &Vector3::new(0.0, 0.0, -1.0),
            &Vector3::zeros(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PointBehindCamera { .. }));
    }

    #[test]
    fn principal_point_back_projects_to_axis() {
        let k = nominal_k();
        let ray = back_project(&k, &Distortion::new(0.1, -0.2), &Vector2::new(542.0, 478.0)).unwrap();
        assert_relative_eq!(ray, Vector3::z(), epsilon = 1e-15);
    }

    #[test]
    fn one_focal_offset_gives_45_degrees() {
        let k = CameraIntrinsics::new(1000.0, 1000.0, 542.0, 478.0, 0.0).unwrap();
        let ray = back_project(&k, &Distortion::zero(), &Vector2::new(1542.0, 478.0)).unwrap();
        assert_relative_eq!(ray, Vector3::new(1.0, 0.0, 1.0).normalize(), epsilon = 1e-15);
    }

    #[test]
    fn inverse_matrix_is_exact_inverse() {
        let k = nominal_k();
        let prod = k.matrix() * k.inverse_matrix();
        assert_relative_eq!(prod, Matrix3::identity(), epsilon = 1e-14);
    }

    #[test]
    fn from_matrix_normalizes_scale() {
        let k = nominal_k();
        let back = CameraIntrinsics::from_matrix(&(k.matrix() * -3.0)).unwrap();
        assert_relative_eq!(back.fx, k.fx, max_relative = 1e-15);
        assert_relative_eq!(back.gamma, k.gamma, max_relative = 1e-12);
    }

    #[test]
    fn rejects_nonpositive_focal() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(1.0, -1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn nominal_distortion_is_monotone_over_image() {
        assert!(Distortion::checked(0.1, -0.2, &nominal_k(), (1080.0, 960.0)).is_ok());
    }

    #[test]
    fn folding_distortion_is_rejected() {
        assert!(Distortion::checked(0.0, -5.0, &nominal_k(), (1080.0, 960.0)).is_err());
    }

    #[test]
    fn undistort_reports_divergence() {
        let d = Distortion::new(-3.0, 0.0);
        assert!(matches!(
            d.undistort(&Vector2::new(0.55, 0.0)),
            Err(Error::UndistortionDiverged { .. })
        ));
    }

    proptest! {
        #[test]
        fn distortion_round_trip(u in 0.0f64..1080.0, v in 0.0f64..960.0) {
            let k = nominal_k();
            let d = Distortion::new(0.1, -0.2);
            let ray = back_project(&k, &d, &Vector2::new(u, v)).unwrap();
            let uv = project_camera_point(&k, &d, &ray).unwrap();
            prop_assert!((uv - Vector2::new(u, v)).norm() < 1e-7);
        }

        #[test]
        fn project_then_back_project_recovers_ray(
            w in proptest::array::uniform3(-0.4f64..0.4),
            p in proptest::array::uniform2(-200.0f64..200.0),
            depth in 300.0f64..1500.0,
        ) {
            let k = nominal_k();
            let d = Distortion::new(0.1, -0.2);
            let r = Rotation::exp(&Vector3::from(w));
            let t = Vector3::new(0.0, 0.0, depth);
            let pt = Vector3::new(p[0], p[1], 0.0);
            let uv = project(&k, &d, &r, &t, &pt).unwrap();
            prop_assume!((0.0..1080.0).contains(&uv.x) && (0.0..960.0).contains(&uv.y));
            let ray = back_project(&k, &d, &uv).unwrap();
            let truth = r.apply(&pt) + t;
            prop_assert!(super::super::angular_distance(&ray, &truth).unwrap() < 1e-10);
        }
    }
}
