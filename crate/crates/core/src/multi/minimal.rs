//! Two-image minimal solver.
//!
//! For `H = lambda K M` the conic `Q = K^-T K^-1` satisfies
//! `H^T Q H = lambda^2 M^T M`, and under spherical motion
//! `M^T M = [[1, 0, -x], [0, 1, -y], [-x, -y, |t_cp|^2]]`. Each image therefore
//! gives `(H^T Q H)_12 = 0`, `(H^T Q H)_11 = (H^T Q H)_22`, and
//! `(H^T Q H)_13 + (H^T Q H)_23 + (H^T Q H)_33 + c (H^T Q H)_11 = 0` with the
//! shared unknown `c = x + y - |t_cp|^2`. Stacking both images gives a 6x6
//! matrix `C(c)` with `C(c) q = 0`; `det C(c)` is quadratic in `c` because `c`
//! enters only two rows.

use nalgebra::{Matrix3, Matrix6, RowVector6, Vector6};
use serde::{Deserialize, Serialize};

use super::{decompose_iac, IacVector, SphericalExtrinsics};
use crate::geom::{decompose_homography, CameraIntrinsics, ObservationSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalCandidate {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: SphericalExtrinsics,
    /// Sum of squared constraint residuals, each normalized by `lambda_i^2`.
    pub residual: f64,
    pub hidden_variable: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalReport {
    /// `(d2, d1, d0)` of `det C(c) = d2 c^2 + d1 c + d0`, scaled by the
    /// Hadamard bound of `C`.
    pub coefficients: [f64; 3],
    /// Real roots in normalized coordinates.
    pub roots: Vec<f64>,
    /// Per root: whether it produced a valid candidate.
    pub accepted: Vec<bool>,
    pub candidates: Vec<MinimalCandidate>,
}

/// Entries of `H^T Q H` as linear forms in `q`: `(H^T Q H)_mn = u(H, m, n) . q`.
pub(crate) fn conic_row(h: &Matrix3<f64>, m: usize, n: usize) -> RowVector6<f64> {
    let a = |i: usize, j: usize| h[(i, j)];
    RowVector6::new(
        a(0, m) * a(0, n),
        a(0, m) * a(1, n) + a(0, n) * a(1, m),
        a(0, m) * a(2, n) + a(0, n) * a(2, m),
        a(1, m) * a(1, n),
        a(1, m) * a(2, n) + a(1, n) * a(2, m),
        a(2, m) * a(2, n),
    )
}

struct ImageRows {
    u11: RowVector6<f64>,
    u12: RowVector6<f64>,
    u13: RowVector6<f64>,
    u22: RowVector6<f64>,
    u23: RowVector6<f64>,
    u33: RowVector6<f64>,
}

impl ImageRows {
    fn new(h: &Matrix3<f64>) -> Self {
        Self {
            u11: conic_row(h, 0, 0),
            u12: conic_row(h, 0, 1),
            u13: conic_row(h, 0, 2),
            u22: conic_row(h, 1, 1),
            u23: conic_row(h, 1, 2),
            u33: conic_row(h, 2, 2),
        }
    }
}

fn stacked(rows: &[ImageRows; 2], c: Option<f64>, replace: [bool; 2]) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    for (i, r) in rows.iter().enumerate() {
        m.set_row(3 * i, &r.u12);
        m.set_row(3 * i + 1, &(r.u11 - r.u22));
        let third = if replace[i] {
            r.u11
        } else {
            r.u13 + r.u23 + r.u33 + r.u11 * c.unwrap_or(0.0)
        };
        m.set_row(3 * i + 2, &third);
    }
    m
}

fn real_roots(d2: f64, d1: f64, d0: f64) -> Result<Vec<f64>> {
    let top = d2.abs().max(d1.abs()).max(d0.abs());
    if d2 == 0.0 || d2.abs() < 1e-14 * top {
        if d1 == 0.0 {
            return Err(Error::NoRealRoot);
        }
        let mut roots = vec![-d0 / d1];
        if d2 != 0.0 {
            roots.push(-d1 / d2 - roots[0]);
        }
        return Ok(roots);
    }
    let disc = d1 * d1 - 4.0 * d2 * d0;
    if disc < 0.0 {
        return Err(Error::NoRealRoot);
    }
    let q = -0.5 * (d1 + d1.signum() * disc.sqrt());
    let mut roots = vec![q / d2];
    if q != 0.0 {
        roots.push(d0 / q);
    }
    Ok(roots)
}

/// Valid candidates from exactly two images, best first.
pub fn solve_minimal(obs: &ObservationSet) -> Result<Vec<MinimalCandidate>> {
    Ok(solve_minimal_detailed(obs)?.candidates)
}

pub fn solve_minimal_detailed(obs: &ObservationSet) -> Result<MinimalReport> {
    if obs.len() != 2 {
        return Err(Error::Precondition(format!(
            "the minimal solver takes exactly 2 images, got {}",
            obs.len()
        )));
    }
    let homographies = obs.homographies()?;
    let t = obs.pixel_normalization();
    let (_, world_rms) = obs.target().extent();
    let sigma = obs
        .target()
        .points()
        .iter()
        .map(|p| (p.x * p.x + p.y * p.y).sqrt())
        .fold(world_rms, f64::max);
    let s = Matrix3::new(sigma, 0.0, 0.0, 0.0, sigma, 0.0, 0.0, 0.0, 1.0);
    let hn: Vec<Matrix3<f64>> = homographies.iter().map(|h| t * h.matrix() * s).collect();
    let rows = [ImageRows::new(&hn[0]), ImageRows::new(&hn[1])];

    let bound: f64 = {
        let a = stacked(&rows, Some(0.0), [false; 2]);
        let b = stacked(&rows, None, [true; 2]);
        (0..6)
            .map(|i| a.row(i).norm().max(b.row(i).norm()))
            .product()
    };
    let d0 = stacked(&rows, Some(0.0), [false; 2]).determinant() / bound;
    let d1 = (stacked(&rows, Some(0.0), [true, false]).determinant()
        + stacked(&rows, Some(0.0), [false, true]).determinant())
        / bound;
    let d2 = stacked(&rows, None, [true; 2]).determinant() / bound;
    if !(bound > 0.0) || d0.abs().max(d1.abs()).max(d2.abs()) < 1e-15 {
        return Err(Error::DegenerateConfiguration(
            "constraint determinant vanishes for every hidden value".into(),
        ));
    }
    let roots = real_roots(d2, d1, d0)?;

    let t_inv = t.try_inverse().ok_or(Error::SingularHomography)?;
    let mut accepted = Vec::with_capacity(roots.len());
    let mut candidates = Vec::new();
    for &c in &roots {
        let cand = candidate(&rows, c).and_then(|(q, x, y, r, residual)| {
            let kn = decompose_iac(&IacVector(q.into()))?;
            let k = CameraIntrinsics::from_matrix(&(t_inv * kn.matrix()))?;
            let rotations = homographies
                .iter()
                .map(|h| decompose_homography(h, &k).rotation)
                .collect();
            let extrinsics = SphericalExtrinsics::new(x * sigma, y * sigma, r * sigma, rotations)?;
            Ok(MinimalCandidate {
                intrinsics: k,
                extrinsics,
                residual,
                hidden_variable: c,
            })
        });
        accepted.push(cand.is_ok());
        if let Ok(c) = cand {
            candidates.push(c);
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoPositiveDefiniteCandidate);
    }
    candidates.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    Ok(MinimalReport {
        coefficients: [d2, d1, d0],
        roots,
        accepted,
        candidates,
    })
}

type Candidate = (Vector6<f64>, f64, f64, f64, f64);

fn candidate(rows: &[ImageRows; 2], c: f64) -> Result<Candidate> {
    if !c.is_finite() {
        return Err(Error::NoRealRoot);
    }
    let m = stacked(rows, Some(c), [false; 2]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let imin = svd.singular_values.imin();
    let mut q: Vector6<f64> = v_t.row(imin).transpose();
    if q[5] < 0.0 {
        q = -q;
    }
    if IacVector(q.into()).matrix().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }

    let (mut sxx, mut s13, mut s23, mut s33) = (0.0, 0.0, 0.0, 0.0);
    for r in rows {
        let l = r.u11.dot(&q.transpose());
        sxx += l * l;
        s13 += l * r.u13.dot(&q.transpose());
        s23 += l * r.u23.dot(&q.transpose());
        s33 += l * r.u33.dot(&q.transpose());
    }
    let x = -s13 / sxx;
    let y = -s23 / sxx;
    let t2 = s33 / sxx;
    let r2 = t2 - x * x - y * y;
    if !(r2 > 0.0) {
        return Err(Error::NegativeRadicand("r"));
    }

    let mut residual = 0.0;
    for r in rows {
        let l = r.u11.dot(&q.transpose());
        let terms = [
            r.u12.dot(&q.transpose()),
            (r.u11 - r.u22).dot(&q.transpose()),
            r.u13.dot(&q.transpose()) + x * l,
            r.u23.dot(&q.transpose()) + y * l,
            r.u33.dot(&q.transpose()) - t2 * l,
        ];
        residual += terms.iter().map(|v| (v / l).powi(2)).sum::<f64>();
    }
    Ok((q, x, y, r2.sqrt(), residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots_are_stable() {
        let r = real_roots(1.0, -3.0, 2.0).unwrap();
        let mut r = r;
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![1.0, 2.0]);
        let r = real_roots(0.0, 2.0, -4.0).unwrap();
        assert_eq!(r, vec![2.0]);
        assert_eq!(real_roots(1.0, 0.0, 1.0), Err(Error::NoRealRoot));
        // Vanishing leading coefficient: the finite root stays accurate.
        let r = real_roots(1e-20, 1.0, -0.5).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conic_rows_evaluate_quadratic_form() {
        let h = Matrix3::new(1.0, 0.2, 3.0, -0.4, 2.0, 1.0, 0.01, 0.03, 1.0);
        let qm = Matrix3::new(2.0, 0.1, 0.3, 0.1, 1.5, -0.2, 0.3, -0.2, 4.0);
        let q = IacVector::from_matrix(&qm).0;
        let q = Vector6::from_row_slice(&q);
        let htqh = h.transpose() * qm * h;
        for m in 0..3 {
            for n in 0..3 {
                let v = conic_row(&h, m, n).dot(&q.transpose());
                assert!((v - htqh[(m, n)]).abs() < 1e-12);
            }
        }
    }
}
