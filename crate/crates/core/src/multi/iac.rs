use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geom::CameraIntrinsics;
use crate::{Error, Result};

/// Upper triangle `(Q11, Q12, Q13, Q22, Q23, Q33)` of the image of the
/// absolute conic `Q = K^-T K^-1`, defined up to scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IacVector(pub [f64; 6]);

impl IacVector {
    pub fn from_intrinsics(k: &CameraIntrinsics) -> Self {
        let ki = k.inverse_matrix();
        Self::from_matrix(&(ki.transpose() * ki))
    }

    pub fn from_matrix(q: &Matrix3<f64>) -> Self {
        Self([q[(0, 0)], q[(0, 1)], q[(0, 2)], q[(1, 1)], q[(1, 2)], q[(2, 2)]])
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let q = &self.0;
        Matrix3::new(q[0], q[1], q[2], q[1], q[3], q[4], q[2], q[4], q[5])
    }
}

impl std::ops::Neg for IacVector {
    type Output = IacVector;
    fn neg(self) -> IacVector {
        IacVector(self.0.map(|v| -v))
    }
}

/// Intrinsics from the conic by Cholesky factorization: with `Q = L L^T`,
/// `K` is `L^-T` rescaled so its bottom-right entry is 1.
pub fn decompose_iac(q: &IacVector) -> Result<CameraIntrinsics> {
    let mut m = q.matrix();
    if m[(2, 2)] < 0.0 {
        m = -m;
    }
    let scale = m.abs().max();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = (m / scale).cholesky().ok_or(Error::NotPositiveDefinite)?;
    let k = chol
        .l()
        .transpose()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite)?;
    CameraIntrinsics::from_matrix(&k).map_err(|_| Error::NotPositiveDefinite)
}
