//! Joint refinement of intrinsics, distortion and the reference-to-calibration
//! rotation from ray-to-pixel correspondences.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use super::{
    camera_block, camera_fixed_mask, camera_from_vector, camera_vector, minimize,
    project_with_jacobian, BaOptions, JacobianBlock, LeastSquaresProblem, RefinementConfig,
    ResidualReport,
};
use crate::geom::{skew, CameraIntrinsics, Distortion, Rotation};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SingleBaState {
    pub camera: [f64; 7],
    pub rotation: Rotation,
}

impl SingleBaState {
    pub fn new(k: &CameraIntrinsics, d: &Distortion, rotation: Rotation) -> Self {
        Self {
            camera: camera_vector(k, d),
            rotation,
        }
    }

    pub fn scales(&self) -> Vec<f64> {
        let mut s = self.camera.to_vec();
        s.extend([1.0; 3]);
        s
    }
}

pub struct SingleBaProblem {
    pairs: Vec<(Vector3<f64>, Vector2<f64>)>,
    options: BaOptions,
}

impl SingleBaProblem {
    /// `pairs` holds `(reference ray, calibration pixel)`.
    pub fn new(pairs: Vec<(Vector3<f64>, Vector2<f64>)>, options: BaOptions) -> Self {
        Self { pairs, options }
    }
}

impl LeastSquaresProblem for SingleBaProblem {
    type State = SingleBaState;

    fn num_params(&self) -> usize {
        10
    }

    fn block_size(&self) -> usize {
        2
    }

    fn residuals(&self, s: &SingleBaState) -> Result<DVector<f64>> {
        let (k, d) = camera_from_vector(&s.camera);
        let mut r = Vec::with_capacity(2 * self.pairs.len());
        for (ray, uv) in &self.pairs {
            let proj = crate::geom::project_camera_point(&k, &d, &s.rotation.apply(ray))?;
            r.push(proj.x - uv.x);
            r.push(proj.y - uv.y);
        }
        Ok(DVector::from_vec(r))
    }

    fn jacobian(&self, s: &SingleBaState) -> Result<Vec<JacobianBlock>> {
        let (k, d) = camera_from_vector(&s.camera);
        let rm = s.rotation.matrix();
        let cols: Vec<usize> = (0..10).collect();
        self.pairs
            .iter()
            .map(|(ray, _)| {
                let j = project_with_jacobian(&k, &d, &(rm * ray))?;
                let mut values = DMatrix::zeros(2, 10);
                camera_block(&j, &mut values);
                let d_rot = -j.d_point * rm * skew(ray);
                for r in 0..2 {
                    for c in 0..3 {
                        values[(r, 7 + c)] = d_rot[(r, c)];
                    }
                }
                Ok(JacobianBlock {
                    cols: cols.clone(),
                    values,
                })
            })
            .collect()
    }

    fn retract(&self, s: &SingleBaState, delta: &DVector<f64>) -> SingleBaState {
        let mut out = s.clone();
        for c in 0..7 {
            out.camera[c] += delta[c];
        }
        out.rotation = s.rotation.retract(&delta.fixed_rows::<3>(7).into_owned());
        out
    }

    fn fixed(&self) -> Vec<bool> {
        let mut f = vec![false; 10];
        f[..7].copy_from_slice(&camera_fixed_mask(&self.options));
        f
    }
}

/// Refines `(K, d, R)` so that `project(K, d, R * ray)` matches each pixel.
pub fn single_image_ba(
    pairs: &[(Vector3<f64>, Vector2<f64>)],
    init: (&CameraIntrinsics, &Distortion, &Rotation),
    config: &RefinementConfig,
    options: &BaOptions,
) -> Result<(CameraIntrinsics, Distortion, Rotation, ResidualReport)> {
    if pairs.len() < 8 {
        return Err(Error::Precondition(format!(
            "single-image refinement needs at least 8 correspondences, got {}",
            pairs.len()
        )));
    }
    let problem = SingleBaProblem::new(pairs.to_vec(), *options);
    let out = minimize(&problem, SingleBaState::new(init.0, init.1, *init.2), config)?;
    let r = problem.residuals(&out.state)?;
    let report = ResidualReport::from_residuals(&r, &[r.len()], &out);
    let (k, d) = camera_from_vector(&out.state.camera);
    k.validate()?;
    Ok((k, d, out.state.rotation, report))
}

/// Residual statistics of `(K, d, R)` without refining.
pub fn evaluate_single_image(
    pairs: &[(Vector3<f64>, Vector2<f64>)],
    k: &CameraIntrinsics,
    d: &Distortion,
    rotation: &Rotation,
) -> Result<ResidualReport> {
    let problem = SingleBaProblem::new(pairs.to_vec(), BaOptions::default());
    let r = problem.residuals(&SingleBaState::new(k, d, *rotation))?;
    let rms = (r.norm_squared() / r.len().max(1) as f64).sqrt();
    Ok(ResidualReport {
        rms_reprojection: rms,
        per_image_rms: vec![rms],
        iterations_used: 0,
        converged: false,
        cost_trajectory: vec![r.norm_squared() / 2.0],
    })
}
