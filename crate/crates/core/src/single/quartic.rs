//! Focal initialization from ray angles.
//!
//! With square pixels, zero skew and the principal point at the image centre,
//! a pixel offset `(a, b)` back-projects to `(a, b, f)`. Squaring the cosine
//! equality of a pair `(i, j)` with database cosine `c` and writing
//! `s = 1/f^2`, `P = a_i a_j + b_i b_j`, `rho = a^2 + b^2` gives
//! `(P^2 - c^2 rho_i rho_j) s^2 + (2P - c^2 (rho_i + rho_j)) s + (1 - c^2) = 0`.
//! Summing over pairs yields one quadratic in `s`.

use nalgebra::{Vector2, Vector3};

use super::PairStrategy;
use crate::{Error, Result};

/// Coefficients `(A, B, C)` of `A s^2 + B s + C` summed over `pairs`.
pub fn quartic_coefficients(
    correspondences: &[(Vector2<f64>, Vector3<f64>)],
    centre: Vector2<f64>,
    pairs: &[(usize, usize)],
) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for &(i, j) in pairs {
        let (pi, ri) = &correspondences[i];
        let (pj, rj) = &correspondences[j];
        let (ai, aj) = (pi - centre, pj - centre);
        let c = ri.dot(rj) / (ri.norm() * rj.norm());
        let c2 = c * c;
        let p = ai.dot(&aj);
        let (rhoi, rhoj) = (ai.norm_squared(), aj.norm_squared());
        acc[0] += p * p - c2 * rhoi * rhoj;
        acc[1] += 2.0 * p - c2 * (rhoi + rhoj);
        acc[2] += 1.0 - c2;
    }
    acc
}

fn angle_cost(
    correspondences: &[(Vector2<f64>, Vector3<f64>)],
    centre: Vector2<f64>,
    pairs: &[(usize, usize)],
    f: f64,
) -> f64 {
    pairs
        .iter()
        .map(|&(i, j)| {
            let (pi, ri) = &correspondences[i];
            let (pj, rj) = &correspondences[j];
            let mi = Vector3::new(pi.x - centre.x, pi.y - centre.y, f);
            let mj = Vector3::new(pj.x - centre.x, pj.y - centre.y, f);
            let e = mi.dot(&mj) / (mi.norm() * mj.norm()) - ri.dot(rj) / (ri.norm() * rj.norm());
            e * e
        })
        .sum()
}

/// Focal length from `(calibration pixel, database ray)` pairs, assuming the
/// principal point at the image centre, equal focal lengths and no skew.
pub fn init_focal_quartic(
    correspondences: &[(Vector2<f64>, Vector3<f64>)],
    image_width: f64,
    image_height: f64,
) -> Result<f64> {
    init_focal_with_pairs(
        correspondences,
        image_width,
        image_height,
        &PairStrategy::default().pairs(correspondences.len()),
    )
}

pub fn init_focal_with_pairs(
    correspondences: &[(Vector2<f64>, Vector3<f64>)],
    image_width: f64,
    image_height: f64,
    pairs: &[(usize, usize)],
) -> Result<f64> {
    if correspondences.len() < 2 || pairs.is_empty() {
        return Err(Error::Precondition(
            "focal initialization needs at least one point pair".into(),
        ));
    }
    let centre = Vector2::new(image_width / 2.0, image_height / 2.0);
    let [a, b, c] = quartic_coefficients(correspondences, centre, pairs);
    let scale = a.abs().max(b.abs()).max(c.abs());
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NoRealRoot);
    }
    let mut roots = Vec::new();
    if a.abs() <= 1e-300 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            roots.push(q / a);
            if q != 0.0 {
                roots.push(c / q);
            }
        }
    }
    roots
        .into_iter()
        .filter(|s| *s > 0.0 && s.is_finite())
        .map(|s| 1.0 / s.sqrt())
        .map(|f| (angle_cost(correspondences, centre, pairs, f), f))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, f)| f)
        .ok_or(Error::NoRealRoot)
}
