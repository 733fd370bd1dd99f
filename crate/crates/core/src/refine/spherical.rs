//! Bundle adjustment under the spherical motion model: every image shares one
//! optical centre `t_cp` and differs only by rotation, so `Pc = R (P - t_cp)`.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    camera_block, camera_fixed_mask, camera_from_vector, camera_vector, minimize,
    project_with_jacobian, BaOptions, JacobianBlock, LeastSquaresProblem, RefinementConfig,
    ResidualReport,
};
use crate::geom::{skew, CameraIntrinsics, Distortion, ObservationSet, Rotation};
use crate::multi::SphericalExtrinsics;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalState {
    pub camera: [f64; 7],
    pub center: Vector3<f64>,
    pub rotations: Vec<Rotation>,
}

impl SphericalState {
    pub fn new(k: &CameraIntrinsics, d: &Distortion, ext: &SphericalExtrinsics) -> Self {
        Self {
            camera: camera_vector(k, d),
            center: ext.center(),
            rotations: ext.rotations.clone(),
        }
    }

    /// Coordinate scales used for finite-difference steps.
    pub fn scales(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.camera.to_vec();
        s.extend(self.center.iter());
        s.extend(std::iter::repeat_n(1.0, 3 * self.rotations.len()));
        s
    }
}

/// Full output of a spherical calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalCalibration {
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
    pub extrinsics: SphericalExtrinsics,
    pub report: ResidualReport,
}

pub struct SphericalBaProblem {
    images: Vec<Vec<(Vector3<f64>, Vector2<f64>)>>,
    options: BaOptions,
}

impl SphericalBaProblem {
    pub fn new(obs: &ObservationSet, options: BaOptions) -> Self {
        Self {
            images: (0..obs.len()).map(|i| obs.correspondences(i)).collect(),
            options,
        }
    }

    fn counts(&self) -> Vec<usize> {
        self.images.iter().map(|im| 2 * im.len()).collect()
    }
}

impl LeastSquaresProblem for SphericalBaProblem {
    type State = SphericalState;

    fn num_params(&self) -> usize {
        10 + 3 * self.images.len()
    }

    fn block_size(&self) -> usize {
        2
    }

    fn residuals(&self, s: &SphericalState) -> Result<DVector<f64>> {
        let (k, d) = camera_from_vector(&s.camera);
        let mut r = Vec::with_capacity(self.counts().iter().sum());
        for (img, rot) in self.images.iter().zip(&s.rotations) {
            for (p, uv) in img {
                let pc = rot.apply(&(p - s.center));
                let proj = crate::geom::project_camera_point(&k, &d, &pc)?;
                r.push(proj.x - uv.x);
                r.push(proj.y - uv.y);
            }
        }
        Ok(DVector::from_vec(r))
    }

    fn jacobian(&self, s: &SphericalState) -> Result<Vec<JacobianBlock>> {
        let (k, d) = camera_from_vector(&s.camera);
        let mut blocks = Vec::new();
        for (i, (img, rot)) in self.images.iter().zip(&s.rotations).enumerate() {
            let rm = rot.matrix();
            let ri = 10 + 3 * i;
            let cols: Vec<usize> = (0..10).chain(ri..ri + 3).collect();
            for (p, _) in img {
                let v = p - s.center;
                let j = project_with_jacobian(&k, &d, &(rm * v))?;
                let mut values = DMatrix::zeros(2, 13);
                camera_block(&j, &mut values);
                let d_center = -j.d_point * rm;
                let d_rot = -j.d_point * rm * skew(&v);
                for r in 0..2 {
                    for c in 0..3 {
                        values[(r, 7 + c)] = d_center[(r, c)];
                        values[(r, 10 + c)] = d_rot[(r, c)];
                    }
                }
                blocks.push(JacobianBlock {
                    cols: cols.clone(),
                    values,
                });
            }
        }
        Ok(blocks)
    }

    fn retract(&self, s: &SphericalState, delta: &DVector<f64>) -> SphericalState {
        let mut out = s.clone();
        for c in 0..7 {
            out.camera[c] += delta[c];
        }
        for c in 0..3 {
            out.center[c] += delta[7 + c];
        }
        for (i, r) in out.rotations.iter_mut().enumerate() {
            *r = r.retract(&delta.fixed_rows::<3>(10 + 3 * i).into_owned());
        }
        out
    }

    fn fixed(&self) -> Vec<bool> {
        let mut f = vec![false; self.num_params()];
        f[..7].copy_from_slice(&camera_fixed_mask(&self.options));
        if self.options.freeze_center {
            f[7..10].fill(true);
        }
        f
    }
}

/// Residual statistics of a spherical calibration without refining.
pub fn evaluate_spherical(
    obs: &ObservationSet,
    k: &CameraIntrinsics,
    d: &Distortion,
    ext: &SphericalExtrinsics,
) -> Result<ResidualReport> {
    if ext.rotations.len() != obs.len() {
        return Err(Error::Precondition(format!(
            "{} rotations for {} images",
            ext.rotations.len(),
            obs.len()
        )));
    }
    let problem = SphericalBaProblem::new(obs, BaOptions::default());
    let r = problem.residuals(&SphericalState::new(k, d, ext))?;
    let counts = problem.counts();
    let mut per_image = Vec::with_capacity(counts.len());
    let mut offset = 0;
    for c in counts {
        let seg = r.rows(offset, c);
        per_image.push((seg.norm_squared() / c.max(1) as f64).sqrt());
        offset += c;
    }
    Ok(ResidualReport {
        rms_reprojection: (r.norm_squared() / r.len().max(1) as f64).sqrt(),
        per_image_rms: per_image,
        iterations_used: 0,
        converged: false,
        cost_trajectory: vec![r.norm_squared() / 2.0],
    })
}

/// Refines intrinsics, distortion, rotations and the shared optical centre.
pub fn spherical_ba(
    obs: &ObservationSet,
    init: (&CameraIntrinsics, &Distortion, &SphericalExtrinsics),
    config: &RefinementConfig,
) -> Result<SphericalCalibration> {
    spherical_ba_with(obs, init, config, &BaOptions::default())
}

pub fn spherical_ba_with(
    obs: &ObservationSet,
    (k, d, ext): (&CameraIntrinsics, &Distortion, &SphericalExtrinsics),
    config: &RefinementConfig,
    options: &BaOptions,
) -> Result<SphericalCalibration> {
    if ext.rotations.len() != obs.len() {
        return Err(Error::Precondition(format!(
            "{} rotations for {} images",
            ext.rotations.len(),
            obs.len()
        )));
    }
    if !ext.center().iter().all(|v| v.is_finite()) {
        return Err(Error::Precondition("optical centre is not finite".into()));
    }
    let problem = SphericalBaProblem::new(obs, *options);
    let out = minimize(&problem, SphericalState::new(k, d, ext), config)?;
    let r = problem.residuals(&out.state)?;
    let report = ResidualReport::from_residuals(&r, &problem.counts(), &out);
    let (k, d) = camera_from_vector(&out.state.camera);
    k.validate()?;
    let extrinsics = SphericalExtrinsics::from_center(&out.state.center, out.state.rotations)?;
    Ok(SphericalCalibration {
        intrinsics: k,
        distortion: d,
        extrinsics,
        report,
    })
}
