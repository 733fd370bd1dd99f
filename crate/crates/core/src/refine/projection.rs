//! Projection of a camera-frame point with derivatives.

use nalgebra::{Matrix2, SMatrix, Vector2, Vector3};

use crate::geom::{CameraIntrinsics, Distortion};
use crate::{Error, Result};

pub type Matrix2x5 = SMatrix<f64, 2, 5>;
pub type Matrix2x3 = SMatrix<f64, 2, 3>;

pub struct ProjectionJacobian {
    pub uv: Vector2<f64>,
    /// With respect to `[fx, fy, cx, cy, gamma]`.
    pub d_intrinsics: Matrix2x5,
    /// With respect to `[d1, d2]`.
    pub d_distortion: Matrix2<f64>,
    /// With respect to the camera-frame point.
    pub d_point: Matrix2x3,
}

pub fn project_with_jacobian(
    k: &CameraIntrinsics,
    d: &Distortion,
    pc: &Vector3<f64>,
) -> Result<ProjectionJacobian> {
    if !(pc.z > 0.0) {
        return Err(Error::PointBehindCamera { depth: pc.z });
    }
    let iz = 1.0 / pc.z;
    let (x, y) = (pc.x * iz, pc.y * iz);
    let r2 = x * x + y * y;
    let r4 = r2 * r2;
    let s = d.factor(r2);
    let (xd, yd) = (x * s, y * s);
    let uv = Vector2::new(k.fx * xd + k.gamma * yd + k.cx, k.fy * yd + k.cy);

    let d_intrinsics = Matrix2x5::new(
        xd, 0.0, 1.0, 0.0, yd, //
        0.0, yd, 0.0, 1.0, 0.0,
    );
    // Pixel with respect to distorted normalized coordinates.
    let a = Matrix2::new(k.fx, k.gamma, 0.0, k.fy);
    let d_norm_dist = Matrix2::new(x * r2, x * r4, y * r2, y * r4);
    let ds = 2.0 * (d.d1 + 2.0 * d.d2 * r2);
    let d_norm_ideal = Matrix2::new(
        s + x * ds * x,
        x * ds * y,
        y * ds * x,
        s + y * ds * y,
    );
    let d_ideal_point = Matrix2x3::new(iz, 0.0, -x * iz, 0.0, iz, -y * iz);

    Ok(ProjectionJacobian {
        uv,
        d_intrinsics,
        d_distortion: a * d_norm_dist,
        d_point: a * d_norm_ideal * d_ideal_point,
    })
}
