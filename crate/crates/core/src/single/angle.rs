//! Intrinsics from angle invariance: the angle between two calibration-image
//! rays must equal the angle between the matching database rays.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use crate::geom::CameraIntrinsics;
use crate::refine::{minimize, JacobianBlock, LeastSquaresProblem, RefinementConfig};
use crate::{Error, Result};

/// Per-pair residual `cos(K^-1 p_i, K^-1 p_j) - cos(q_i, q_j)`.
pub struct AngleProblem {
    pixels: Vec<Vector2<f64>>,
    pairs: Vec<(usize, usize)>,
    target: Vec<f64>,
    hold_skew: bool,
}

impl AngleProblem {
    pub fn new(
        correspondences: &[(Vector2<f64>, Vector3<f64>)],
        pairs: Vec<(usize, usize)>,
        hold_skew: bool,
    ) -> Self {
        let target = pairs
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (&correspondences[i].1, &correspondences[j].1);
                a.dot(b) / (a.norm() * b.norm())
            })
            .collect();
        Self {
            pixels: correspondences.iter().map(|c| c.0).collect(),
            pairs,
            target,
            hold_skew,
        }
    }

    /// Normalized direction and its derivative with respect to
    /// `[fx, fy, cx, cy, gamma]`.
    fn ray(k: &[f64], p: &Vector2<f64>) -> (Vector3<f64>, nalgebra::SMatrix<f64, 3, 5>) {
        let (fx, fy, cx, cy, g) = (k[0], k[1], k[2], k[3], k[4]);
        let y = (p.y - cy) / fy;
        let x = (p.x - cx - g * y) / fx;
        let dy = [0.0, -y / fy, 0.0, -1.0 / fy, 0.0];
        let dx = [
            -x / fx,
            -g * dy[1] / fx,
            -1.0 / fx,
            -g * dy[3] / fx,
            -y / fx,
        ];
        let mut d = nalgebra::SMatrix::<f64, 3, 5>::zeros();
        for c in 0..5 {
            d[(0, c)] = dx[c];
            d[(1, c)] = dy[c];
        }
        (Vector3::new(x, y, 1.0), d)
    }
}

impl LeastSquaresProblem for AngleProblem {
    type State = DVector<f64>;

    fn num_params(&self) -> usize {
        5
    }

    fn block_size(&self) -> usize {
        1
    }

    fn residuals(&self, k: &DVector<f64>) -> Result<DVector<f64>> {
        if !(k[0] > 0.0 && k[1] > 0.0) {
            return Err(Error::InvalidInput("non-positive focal length".into()));
        }
        Ok(DVector::from_iterator(
            self.pairs.len(),
            self.pairs.iter().zip(&self.target).map(|(&(i, j), t)| {
                let (a, _) = Self::ray(k.as_slice(), &self.pixels[i]);
                let (b, _) = Self::ray(k.as_slice(), &self.pixels[j]);
                a.dot(&b) / (a.norm() * b.norm()) - t
            }),
        ))
    }

    fn jacobian(&self, k: &DVector<f64>) -> Result<Vec<JacobianBlock>> {
        let cols: Vec<usize> = (0..5).collect();
        Ok(self
            .pairs
            .iter()
            .map(|&(i, j)| {
                let (a, da) = Self::ray(k.as_slice(), &self.pixels[i]);
                let (b, db) = Self::ray(k.as_slice(), &self.pixels[j]);
                let (na, nb) = (a.norm(), b.norm());
                let cos = a.dot(&b) / (na * nb);
                let grad_a = b / (na * nb) - a * (cos / (na * na));
                let grad_b = a / (na * nb) - b * (cos / (nb * nb));
                let row = grad_a.transpose() * da + grad_b.transpose() * db;
                JacobianBlock {
                    cols: cols.clone(),
                    values: DMatrix::from_row_slice(1, 5, row.as_slice()),
                }
            })
            .collect())
    }

    fn retract(&self, k: &DVector<f64>, delta: &DVector<f64>) -> DVector<f64> {
        k + delta
    }

    fn fixed(&self) -> Vec<bool> {
        vec![false, false, false, false, self.hold_skew]
    }
}

/// Refines all five intrinsics (or four with `hold_skew`) from pair angles.
///
/// `config.cauchy_scale` is in pixels and is converted to cosine units by
/// dividing by the initial focal length.
pub fn refine_intrinsics_angle(
    correspondences: &[(Vector2<f64>, Vector3<f64>)],
    k0: &CameraIntrinsics,
    pairs: Vec<(usize, usize)>,
    config: &RefinementConfig,
    hold_skew: bool,
) -> Result<CameraIntrinsics> {
    if pairs.len() < 5 {
        return Err(Error::Precondition(format!(
            "angle refinement needs at least 5 point pairs, got {}",
            pairs.len()
        )));
    }
    let problem = AngleProblem::new(correspondences, pairs, hold_skew);
    let cfg = RefinementConfig {
        cauchy_scale: config.cauchy_scale / k0.fx.max(k0.fy),
        // Cosine residuals are tiny; scale the gradient test accordingly.
        gradient_tolerance: config.gradient_tolerance * 1e-6,
        ..*config
    };
    let out = minimize(&problem, DVector::from_row_slice(&k0.to_array()), &cfg)?;
    if !out.converged {
        return Err(Error::NonConvergence(format!(
            "angle refinement used all {} iterations",
            out.iterations
        )));
    }
    let s = out.state;
    CameraIntrinsics::new(s[0], s[1], s[2], s[3], s[4])
}
