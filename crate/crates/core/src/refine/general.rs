//! Unconstrained bundle adjustment with an independent 6-DOF pose per image,
//! used to refine the plane-based baseline.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    camera_block, camera_fixed_mask, camera_from_vector, camera_vector, minimize,
    project_with_jacobian, BaOptions, JacobianBlock, LeastSquaresProblem, RefinementConfig,
    ResidualReport,
};
use crate::geom::{skew, CameraIntrinsics, Distortion, ObservationSet, Rotation};
use crate::{Error, Result};

/// Pose `Pc = R P + t` of one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoseEstimate {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralState {
    pub camera: [f64; 7],
    pub poses: Vec<PlanarPoseEstimate>,
}

impl GeneralState {
    pub fn new(k: &CameraIntrinsics, d: &Distortion, poses: Vec<PlanarPoseEstimate>) -> Self {
        Self {
            camera: camera_vector(k, d),
            poses,
        }
    }

    pub fn scales(&self) -> Vec<f64> {
        let mut s = self.camera.to_vec();
        for p in &self.poses {
            s.extend([1.0; 3]);
            s.extend(p.translation.iter());
        }
        s
    }
}

pub struct GeneralBaProblem {
    images: Vec<Vec<(Vector3<f64>, Vector2<f64>)>>,
    options: BaOptions,
}

impl GeneralBaProblem {
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

impl LeastSquaresProblem for GeneralBaProblem {
    type State = GeneralState;

    fn num_params(&self) -> usize {
        7 + 6 * self.images.len()
    }

    fn block_size(&self) -> usize {
        2
    }

    fn residuals(&self, s: &GeneralState) -> Result<DVector<f64>> {
        let (k, d) = camera_from_vector(&s.camera);
        let mut r = Vec::new();
        for (img, pose) in self.images.iter().zip(&s.poses) {
            for (p, uv) in img {
                let pc = pose.rotation.apply(p) + pose.translation;
                let proj = crate::geom::project_camera_point(&k, &d, &pc)?;
                r.push(proj.x - uv.x);
                r.push(proj.y - uv.y);
            }
        }
        Ok(DVector::from_vec(r))
    }

    fn jacobian(&self, s: &GeneralState) -> Result<Vec<JacobianBlock>> {
        let (k, d) = camera_from_vector(&s.camera);
        let mut blocks = Vec::new();
        for (i, (img, pose)) in self.images.iter().zip(&s.poses).enumerate() {
            let rm = pose.rotation.matrix();
            let pi = 7 + 6 * i;
            let cols: Vec<usize> = (0..7).chain(pi..pi + 6).collect();
            for (p, _) in img {
                let j = project_with_jacobian(&k, &d, &(rm * p + pose.translation))?;
                let mut values = DMatrix::zeros(2, 13);
                camera_block(&j, &mut values);
                let d_rot = -j.d_point * rm * skew(p);
                for r in 0..2 {
                    for c in 0..3 {
                        values[(r, 7 + c)] = d_rot[(r, c)];
                        values[(r, 10 + c)] = j.d_point[(r, c)];
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

    fn retract(&self, s: &GeneralState, delta: &DVector<f64>) -> GeneralState {
        let mut out = s.clone();
        for c in 0..7 {
            out.camera[c] += delta[c];
        }
        for (i, pose) in out.poses.iter_mut().enumerate() {
            let o = 7 + 6 * i;
            pose.rotation = pose
                .rotation
                .retract(&delta.fixed_rows::<3>(o).into_owned());
            pose.translation += delta.fixed_rows::<3>(o + 3);
        }
        out
    }

    fn fixed(&self) -> Vec<bool> {
        let mut f = vec![false; self.num_params()];
        f[..7].copy_from_slice(&camera_fixed_mask(&self.options));
        f
    }
}

/// Refines intrinsics, distortion and one free pose per image.
pub fn general_ba(
    obs: &ObservationSet,
    k: &CameraIntrinsics,
    d: &Distortion,
    poses: Vec<PlanarPoseEstimate>,
    config: &RefinementConfig,
    options: &BaOptions,
) -> Result<(CameraIntrinsics, Distortion, Vec<PlanarPoseEstimate>, ResidualReport)> {
    if poses.len() != obs.len() {
        return Err(Error::Precondition(format!(
            "{} poses for {} images",
            poses.len(),
            obs.len()
        )));
    }
    let problem = GeneralBaProblem::new(obs, *options);
    let out = minimize(&problem, GeneralState::new(k, d, poses), config)?;
    let r = problem.residuals(&out.state)?;
    let report = ResidualReport::from_residuals(&r, &problem.counts(), &out);
    let (k, d) = camera_from_vector(&out.state.camera);
    k.validate()?;
    Ok((k, d, out.state.poses, report))
}
