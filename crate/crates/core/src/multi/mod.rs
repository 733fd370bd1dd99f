//! Initial estimates under the spherical motion constraint.
//!
//! With the camera rotating about a fixed point, every image satisfies
//! `H_i = lambda_i K M_i` with `M_i = [r1 r2 -R_i t_cp]` and `det(M_i) = r`. The
//! known determinant fixes the relative scales `lambda_i / lambda_base`, which
//! turns the per-image conic constraints into one linear system in `K K^T` and
//! `(M^T M)^-1`.

mod closed_form;
mod degeneracy;
mod iac;
mod minimal;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use closed_form::{solve_closed_form, solve_closed_form_with, ClosedFormOptions, ClosedFormSolution};
pub use degeneracy::{
    constraint_ranks, detect_degeneracy, detect_degeneracy_with, DegeneracyOptions,
    DegeneracyReport,
};
pub use iac::{decompose_iac, IacVector};
pub use minimal::{solve_minimal, solve_minimal_detailed, MinimalCandidate, MinimalReport};

use crate::geom::{Homography, Rotation};
use crate::{Error, Result};

/// Camera motion on a sphere: optical centre `t_cp = (x, y, -r)` in target
/// coordinates, shared by all images, and one rotation per image so that a
/// target point maps to `Pc = R (P - t_cp)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalExtrinsics {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub rotations: Vec<Rotation>,
}

impl SphericalExtrinsics {
    pub fn new(x: f64, y: f64, r: f64, rotations: Vec<Rotation>) -> Result<Self> {
        if !(r > 0.0) || !x.is_finite() || !y.is_finite() || !r.is_finite() {
            return Err(Error::InvalidInput(format!(
                "spherical radius must be positive and finite, got {r}"
            )));
        }
        Ok(Self { x, y, r, rotations })
    }

    pub fn from_center(center: &Vector3<f64>, rotations: Vec<Rotation>) -> Result<Self> {
        Self::new(center.x, center.y, -center.z, rotations)
    }

    /// `t_cp = (x, y, -r)`.
    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, -self.r)
    }

    /// Camera-frame translation `t = -R t_cp` of image `i`.
    pub fn translation(&self, i: usize) -> Vector3<f64> {
        -self.rotations[i].apply(&self.center())
    }

    /// `[r1 r2 -R t_cp]`, whose determinant equals `r`.
    pub fn motion_matrix(&self, i: usize) -> Matrix3<f64> {
        let rm = self.rotations[i].matrix();
        Matrix3::from_columns(&[
            rm.column(0).into_owned(),
            rm.column(1).into_owned(),
            self.translation(i),
        ])
    }
}

/// Real cube root of `det(H_base^-1 H_i)`: the scale of `H_i` relative to
/// `H_base` once both are written as `lambda K M` with equal `det(M)`.
pub fn scale_ratio(h_i: &Homography, h_base: &Homography) -> Result<f64> {
    scale_ratio_matrix(h_i.matrix(), h_base.matrix())
}

pub(crate) fn scale_ratio_matrix(h_i: &Matrix3<f64>, h_base: &Matrix3<f64>) -> Result<f64> {
    let inv = h_base.try_inverse().ok_or(Error::SingularHomography)?;
    let det = (inv * h_i).determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularHomography);
    }
    Ok(det.cbrt())
}

/// Stacked linear constraints `D [w; a] = b`.
///
/// `w = (W11, W12, W13, W22, W23)` holds the upper triangle of `W = K K^T`
/// (with `W33 = 1`) and `a` the six distinct entries of `(M^T M)^-1 /
/// lambda_base^2`. Each image contributes one row per distinct entry of the
/// symmetric matrix `H^-1 W H^-T`, in the order 11, 12, 13, 22, 23, 33.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub d: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lambda_ratios: Vec<f64>,
}

pub const ROWS_PER_IMAGE: usize = 6;
const ENTRY_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl LinearSystem {
    /// `D [w; a] - b` at the given unknowns.
    pub fn residual(&self, w: &[f64; 5], a: &[f64; 6]) -> DVector<f64> {
        let x = DVector::from_iterator(11, w.iter().chain(a.iter()).copied());
        &self.d * x - &self.b
    }
}

pub fn build_linear_system(homographies: &[Homography], base_index: usize) -> Result<LinearSystem> {
    let ms: Vec<Matrix3<f64>> = homographies.iter().map(|h| *h.matrix()).collect();
    build_linear_system_from_matrices(&ms, base_index)
}

pub(crate) fn build_linear_system_from_matrices(
    hs: &[Matrix3<f64>],
    base_index: usize,
) -> Result<LinearSystem> {
    if hs.len() < 3 {
        return Err(Error::Precondition(format!(
            "the linear system needs at least 3 images, got {}",
            hs.len()
        )));
    }
    assemble_rows(hs, base_index)
}

/// Row assembly without the image-count check, for rank diagnostics.
pub(crate) fn assemble_rows(hs: &[Matrix3<f64>], base_index: usize) -> Result<LinearSystem> {
    if base_index >= hs.len() {
        return Err(Error::Precondition(format!("base index {base_index} out of range")));
    }
    let n = hs.len();
    let mut d = DMatrix::zeros(ROWS_PER_IMAGE * n, 11);
    let mut b = DVector::zeros(ROWS_PER_IMAGE * n);
    let mut ratios = Vec::with_capacity(n);
    for (i, h) in hs.iter().enumerate() {
        let ratio = scale_ratio_matrix(h, &hs[base_index])?;
        ratios.push(ratio);
        let g = h.try_inverse().ok_or(Error::SingularHomography)?;
        for (k, &(m, n)) in ENTRY_PAIRS.iter().enumerate() {
            let row = ROWS_PER_IMAGE * i + k;
            let v = [
                g[(m, 0)] * g[(n, 0)],
                g[(m, 0)] * g[(n, 1)] + g[(m, 1)] * g[(n, 0)],
                g[(m, 0)] * g[(n, 2)] + g[(m, 2)] * g[(n, 0)],
                g[(m, 1)] * g[(n, 1)],
                g[(m, 1)] * g[(n, 2)] + g[(m, 2)] * g[(n, 1)],
            ];
            for (c, val) in v.into_iter().enumerate() {
                d[(row, c)] = val;
            }
            d[(row, 5 + k)] = -1.0 / (ratio * ratio);
            b[row] = -g[(m, 2)] * g[(n, 2)];
        }
    }
    Ok(LinearSystem {
        d,
        b,
        lambda_ratios: ratios,
    })
}

pub(crate) fn minimal_conic_row(
    h: &Matrix3<f64>,
    m: usize,
    n: usize,
) -> nalgebra::RowVector6<f64> {
    minimal::conic_row(h, m, n)
}

/// Singular values of `m` after scaling every column to unit norm, sorted
/// in decreasing order.
pub fn equilibrated_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut scaled = m.clone();
    for mut col in scaled.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    let mut sv: Vec<f64> = scaled.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn numerical_rank(sv: &[f64], cutoff: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > cutoff * top).count()
}
