use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Proper rotation of 3-space.
///
/// Serialized as three rows of a 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Rotation3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Rotation3::identity())
    }

    /// Exponential map of an axis-angle vector.
    pub fn exp(w: &Vector3<f64>) -> Self {
        Self(Rotation3::new(*w))
    }

    /// Axis-angle vector with angle in `[0, pi]`.
    pub fn log(&self) -> Vector3<f64> {
        self.0.scaled_axis()
    }

    pub fn about_z(angle: f64) -> Self {
        Self::exp(&Vector3::new(0.0, 0.0, angle))
    }

    /// Accepts a matrix that is orthonormal to within `1e-6` and snaps it to
    /// the nearest rotation.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let err = (m.transpose() * m - Matrix3::identity()).abs().max();
        if !err.is_finite() || err > 1e-6 || m.determinant() <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "matrix is not a rotation (orthogonality error {err:e})"
            )));
        }
        Ok(Self::nearest(m))
    }

    /// Nearest rotation in the Frobenius sense, via SVD.
    pub fn nearest(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let mut fix = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            fix[(2, 2)] = -1.0;
        }
        Self(Rotation3::from_matrix_unchecked(u * fix * v_t))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        self.0.matrix()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.inverse())
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// `self * Exp(delta)`, re-orthonormalized.
    pub fn retract(&self, delta: &Vector3<f64>) -> Self {
        Self::nearest(&(self.matrix() * Rotation3::new(*delta).matrix()))
    }

    /// Geodesic distance in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        // atan2 keeps full precision for tiny angles, unlike acos of the trace.
        let m = self.matrix().transpose() * other.matrix();
        let s = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
        (0.5 * s.norm()).atan2(0.5 * (m.trace() - 1.0))
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.matrix();
        let rows: [[f64; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        let m = Matrix3::from_fn(|i, j| rows[i][j]);
        Rotation::from_matrix(&m).map_err(serde::de::Error::custom)
    }
}

/// Skew-symmetric cross-product matrix.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exp_log_round_trip() {
        let w = Vector3::new(0.3, -0.2, 0.5);
        assert_relative_eq!(Rotation::exp(&w).log(), w, epsilon = 1e-14);
    }

    #[test]
    fn nearest_repairs_perturbation() {
        let r = Rotation::exp(&Vector3::new(0.1, 0.2, 0.3));
        let noisy = r.matrix() + Matrix3::from_element(1e-6);
        let fixed = Rotation::nearest(&noisy);
        let m = fixed.matrix();
        assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-12);
        assert!((m.determinant() - 1.0).abs() < 1e-12);
        assert!(fixed.angle_to(&r) < 1e-5);
    }

    #[test]
    fn reflections_are_rejected() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Rotation::from_matrix(&m).is_err());
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let r = Rotation::exp(&Vector3::new(0.1, -0.4, 0.25));
        let s = serde_json::to_string(&r).unwrap();
        let back: Rotation = serde_json::from_str(&s).unwrap();
        assert!(back.angle_to(&r) < 1e-15);
    }

    #[test]
    fn skew_matches_cross() {
        let a = Vector3::new(1.0, 2.0, 3.0);
        let b = Vector3::new(-0.5, 4.0, 0.25);
        assert_relative_eq!(skew(&a) * b, a.cross(&b));
    }

    proptest! {
        #[test]
        fn retract_matches_right_composition(
            w in proptest::array::uniform3(-1.0f64..1.0),
            dw in proptest::array::uniform3(-0.1f64..0.1),
        ) {
            let r = Rotation::exp(&Vector3::from(w));
            let a = r.retract(&Vector3::from(dw));
            let b = r * Rotation::exp(&Vector3::from(dw));
            prop_assert!(a.angle_to(&b) < 1e-12);
        }
    }
}
