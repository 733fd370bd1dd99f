//! Nonlinear refinement: the LM engine and the bundle adjustment problems.

mod general;
mod lm;
mod projection;
mod single;
mod spherical;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use general::{general_ba, GeneralBaProblem, GeneralState, PlanarPoseEstimate};
pub use lm::{
    finite_difference_jacobian, lm_minimize, minimize, CauchyLoss, JacobianBlock,
    LeastSquaresProblem, LmOutcome, RefinementConfig,
};
pub use projection::{project_with_jacobian, ProjectionJacobian};
pub use single::{evaluate_single_image, single_image_ba, SingleBaProblem, SingleBaState};
pub use spherical::{evaluate_spherical, spherical_ba, spherical_ba_with, SphericalBaProblem, SphericalCalibration, SphericalState};

use crate::geom::{CameraIntrinsics, Distortion};

/// Which camera parameters a bundle adjustment keeps fixed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaOptions {
    pub hold_skew: bool,
    pub hold_distortion: bool,
    /// Spherical problem only: keep the optical centre at its initial value.
    pub freeze_center: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Per-coordinate RMS of the final residuals, in pixels.
    pub rms_reprojection: f64,
    pub per_image_rms: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub cost_trajectory: Vec<f64>,
}

impl ResidualReport {
    pub(crate) fn from_residuals<S>(
        r: &DVector<f64>,
        counts: &[usize],
        outcome: &LmOutcome<S>,
    ) -> Self {
        let mut per_image = Vec::with_capacity(counts.len());
        let mut offset = 0;
        for &c in counts {
            let seg = r.rows(offset, c);
            per_image.push(rms(seg.iter()));
            offset += c;
        }
        Self {
            rms_reprojection: rms(r.iter()),
            per_image_rms: per_image,
            iterations_used: outcome.iterations,
            converged: outcome.converged,
            cost_trajectory: outcome.cost_trajectory.clone(),
        }
    }

    /// True when the cost never increased between accepted steps.
    pub fn is_monotone(&self) -> bool {
        self.cost_trajectory.windows(2).all(|w| w[1] <= w[0])
    }
}

fn rms<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Intrinsics followed by distortion: `[fx, fy, cx, cy, gamma, d1, d2]`.
pub(crate) fn camera_vector(k: &CameraIntrinsics, d: &Distortion) -> [f64; 7] {
    let a = k.to_array();
    [a[0], a[1], a[2], a[3], a[4], d.d1, d.d2]
}

pub(crate) fn camera_from_vector(v: &[f64; 7]) -> (CameraIntrinsics, Distortion) {
    (
        CameraIntrinsics::from_array([v[0], v[1], v[2], v[3], v[4]]),
        Distortion::new(v[5], v[6]),
    )
}

pub(crate) fn camera_fixed_mask(options: &BaOptions) -> [bool; 7] {
    [
        false,
        false,
        false,
        false,
        options.hold_skew,
        options.hold_distortion,
        options.hold_distortion,
    ]
}

/// Writes the 2x13 (or narrower) camera part of a reprojection Jacobian block.
pub(crate) fn camera_block(j: &ProjectionJacobian, values: &mut nalgebra::DMatrix<f64>) {
    for r in 0..2 {
        for c in 0..5 {
            values[(r, c)] = j.d_intrinsics[(r, c)];
        }
        values[(r, 5)] = j.d_distortion[(r, 0)];
        values[(r, 6)] = j.d_distortion[(r, 1)];
    }
}
