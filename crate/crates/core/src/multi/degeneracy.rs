//! Detection of motions that add no new constraints: repeated views (pure
//! camera translation leaves a collimated image unchanged) and rotations about
//! the target normal.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use super::{assemble_rows, equilibrated_singular_values, numerical_rank};
use crate::geom::ObservationSet;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegeneracyOptions {
    /// Two images whose common points agree within this many pixels are
    /// treated as the same view.
    pub pixel_tolerance: f64,
    /// Tolerance on the structure of the relative homography, in target
    /// coordinates scaled to unit extent.
    pub structure_tolerance: f64,
    /// Singular values below `rank_cutoff * sigma_max` count as zero.
    pub rank_cutoff: f64,
}

impl Default for DegeneracyOptions {
    fn default() -> Self {
        Self {
            pixel_tolerance: 0.1,
            structure_tolerance: 1e-6,
            rank_cutoff: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    /// Image pairs that observe the same pixels.
    pub pure_translation_pairs: Vec<(usize, usize)>,
    /// Image pairs related by a rotation about the target normal.
    pub z_rotation_pairs: Vec<(usize, usize)>,
    /// Numerical rank of the stacked spherical system (11 columns).
    pub spherical_rank: usize,
    /// Column-equilibrated singular values of the spherical system, descending.
    pub spherical_singular_values: Vec<f64>,
    /// Numerical rank of the plane-based conic constraints alone (6 columns).
    pub intrinsic_rank: usize,
    /// Image count the report was computed on.
    pub image_count: usize,
}

impl DegeneracyReport {
    pub fn is_flagged(&self) -> bool {
        !self.pure_translation_pairs.is_empty() || !self.z_rotation_pairs.is_empty()
    }
}

pub fn detect_degeneracy(obs: &ObservationSet) -> Result<DegeneracyReport> {
    detect_degeneracy_with(obs, &DegeneracyOptions::default())
}

pub fn detect_degeneracy_with(
    obs: &ObservationSet,
    options: &DegeneracyOptions,
) -> Result<DegeneracyReport> {
    let hs = obs.homographies()?;
    let t = obs.pixel_normalization();
    let normalized: Vec<Matrix3<f64>> = hs.iter().map(|h| t * h.matrix()).collect();

    let sigma = {
        let pts = obs.target().points();
        (pts.iter().map(|p| p.x * p.x + p.y * p.y).sum::<f64>() / pts.len() as f64).sqrt()
    };
    let s = Matrix3::new(sigma, 0.0, 0.0, 0.0, sigma, 0.0, 0.0, 0.0, 1.0);
    let s_inv = Matrix3::new(1.0 / sigma, 0.0, 0.0, 0.0, 1.0 / sigma, 0.0, 0.0, 0.0, 1.0);

    let mut pure = Vec::new();
    let mut zrot = Vec::new();
    for i in 0..obs.len() {
        for j in i + 1..obs.len() {
            if same_view(obs, i, j, options.pixel_tolerance) {
                pure.push((i, j));
            }
            if let Some(hi_inv) = hs[i].matrix().try_inverse() {
                let g = s_inv * hi_inv * hs[j].matrix() * s;
                if is_planar_rotation(&g, options.structure_tolerance) {
                    zrot.push((i, j));
                }
            }
        }
    }

    let (spherical_rank, spherical_singular_values, intrinsic_rank) =
        constraint_ranks(&normalized, options.rank_cutoff)?;
    Ok(DegeneracyReport {
        pure_translation_pairs: pure,
        z_rotation_pairs: zrot,
        spherical_rank,
        spherical_singular_values,
        intrinsic_rank,
        image_count: obs.len(),
    })
}

/// Rank of the spherical system and of the plane-based conic constraints for
/// a set of homographies (ideally in normalized pixel coordinates).
pub fn constraint_ranks(hs: &[Matrix3<f64>], cutoff: f64) -> Result<(usize, Vec<f64>, usize)> {
    let sys = assemble_rows(hs, 0)?;
    let sv = equilibrated_singular_values(&sys.d);
    let rank = numerical_rank(&sv, cutoff);

    let mut v = DMatrix::zeros(2 * hs.len(), 6);
    for (i, h) in hs.iter().enumerate() {
        let h = h / h.norm();
        let u = |m: usize, n: usize| super::minimal_conic_row(&h, m, n);
        v.set_row(2 * i, &u(0, 1));
        v.set_row(2 * i + 1, &(u(0, 0) - u(1, 1)));
    }
    let iv = numerical_rank(&equilibrated_singular_values(&v), cutoff);
    Ok((rank, sv, iv))
}

fn same_view(obs: &ObservationSet, i: usize, j: usize, tol: f64) -> bool {
    let a = &obs.images()[i].points;
    let b = &obs.images()[j].points;
    let mut common = 0;
    let mut max_delta: f64 = 0.0;
    for p in a {
        if let Some(q) = b.iter().find(|q| q.id == p.id) {
            common += 1;
            max_delta = max_delta.max((p.pixel() - q.pixel()).norm());
        }
    }
    common >= 4 && max_delta <= tol
}

/// `g ~ [[c, -s, a], [s, c, b], [0, 0, 1]]`: a rotation about an axis normal
/// to the target plane.
fn is_planar_rotation(g: &Matrix3<f64>, tol: f64) -> bool {
    let z = g[(2, 2)];
    if z == 0.0 || !z.is_finite() {
        return false;
    }
    let g = g / z;
    g[(2, 0)].abs() <= tol
        && g[(2, 1)].abs() <= tol
        && (g[(0, 0)] - g[(1, 1)]).abs() <= tol
        && (g[(0, 1)] + g[(1, 0)]).abs() <= tol
        && (g[(0, 0)].powi(2) + g[(1, 0)].powi(2) - 1.0).abs() <= tol
}
