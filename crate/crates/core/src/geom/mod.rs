//! Camera model, rotations, homographies and the observation containers shared
//! by every solver.

mod camera;
mod homography;
mod rotation;

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use camera::{back_project, project, project_camera_point, CameraIntrinsics, Distortion};
pub use homography::{
    decompose_homography, estimate_homography, hartley_normalization, pose_matrix, Homography,
    PlanarPose,
};
pub use rotation::{skew, Rotation};

use crate::{Error, Result};

/// Angle between two nonzero vectors, in `[0, pi]`.
///
/// Evaluated as `atan2(|a x b|, a . b)`, which equals the clamped arccosine of
/// the normalized dot product but keeps full precision near 0 and pi.
pub fn angular_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> Result<f64> {
    if a.norm_squared() == 0.0 || b.norm_squared() == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(a.cross(b).norm().atan2(a.dot(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPoint {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

/// Planar calibration target on `Z = 0`, in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarTarget {
    points: Vec<TargetPoint>,
    index: BTreeMap<u32, usize>,
}

impl PlanarTarget {
    pub fn new(points: Vec<TargetPoint>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::InvalidInput(format!("target point {} is not finite", p.id)));
            }
            if index.insert(p.id, i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate target point id {}", p.id)));
            }
        }
        if points.len() < 4 {
            return Err(Error::InvalidInput("target needs at least 4 points".into()));
        }
        let xy: Vec<_> = points.iter().map(|p| Vector2::new(p.x, p.y)).collect();
        if is_collinear(&xy) {
            return Err(Error::InvalidInput("target points are collinear".into()));
        }
        Ok(Self { points, index })
    }

    /// Regular grid with ids assigned row-major from 0.
    pub fn grid(cols: usize, rows: usize, pitch_mm: f64) -> Result<Self> {
        let points = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| TargetPoint {
                    id: (r * cols + c) as u32,
                    x: pitch_mm * c as f64,
                    y: pitch_mm * r as f64,
                })
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[TargetPoint] {
        &self.points
    }

    pub fn get(&self, id: u32) -> Option<Vector3<f64>> {
        self.index
            .get(&id)
            .map(|&i| Vector3::new(self.points[i].x, self.points[i].y, 0.0))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Centroid and RMS radius of the target points.
    pub fn extent(&self) -> (Vector2<f64>, f64) {
        let n = self.points.len() as f64;
        let c = self
            .points
            .iter()
            .fold(Vector2::zeros(), |a, p| a + Vector2::new(p.x, p.y))
            / n;
        let rms = (self
            .points
            .iter()
            .map(|p| (Vector2::new(p.x, p.y) - c).norm_squared())
            .sum::<f64>()
            / n)
            .sqrt();
        (c, rms)
    }
}

pub(crate) fn is_collinear(pts: &[Vector2<f64>]) -> bool {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let cov = pts.iter().fold(Matrix2::zeros(), |a, p| {
        let d = p - c;
        a + d * d.transpose()
    });
    let ev = cov.symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    !(hi > 0.0) || lo <= 1e-12 * hi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointObservation {
    pub id: u32,
    pub u: f64,
    pub v: f64,
}

impl PointObservation {
    pub fn pixel(&self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageObservations {
    pub name: String,
    pub points: Vec<PointObservation>,
}

/// Target model plus per-image pixel observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    target: PlanarTarget,
    images: Vec<ImageObservations>,
}

impl ObservationSet {
    pub fn new(target: PlanarTarget, images: Vec<ImageObservations>) -> Result<Self> {
        for img in &images {
            if img.points.len() < 4 {
                return Err(Error::InvalidInput(format!(
                    "image '{}' has {} points, need at least 4",
                    img.name,
                    img.points.len()
                )));
            }
            let mut seen = std::collections::BTreeSet::new();
            for p in &img.points {
                if target.get(p.id).is_none() {
                    return Err(Error::InvalidInput(format!(
                        "image '{}' observes unknown point id {}",
                        img.name, p.id
                    )));
                }
                if !seen.insert(p.id) {
                    return Err(Error::InvalidInput(format!(
                        "image '{}' observes point id {} twice",
                        img.name, p.id
                    )));
                }
                if !(p.u.is_finite() && p.v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "image '{}' has a non-finite pixel for id {}",
                        img.name, p.id
                    )));
                }
            }
        }
        Ok(Self { target, images })
    }

    pub fn target(&self) -> &PlanarTarget {
        &self.target
    }

    pub fn images(&self) -> &[ImageObservations] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Keeps only the listed images, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let images = indices
            .iter()
            .map(|&i| {
                self.images
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("no image {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.target.clone(), images)
    }

    /// `(target point, pixel)` pairs of one image.
    pub fn correspondences(&self, image: usize) -> Vec<(Vector3<f64>, Vector2<f64>)> {
        self.images[image]
            .points
            .iter()
            .map(|p| (self.target.get(p.id).expect("validated"), p.pixel()))
            .collect()
    }

    pub fn homography(&self, image: usize) -> Result<Homography> {
        let corr: Vec<_> = self
            .correspondences(image)
            .into_iter()
            .map(|(p, uv)| (p.xy(), uv))
            .collect();
        estimate_homography(&corr)
    }

    pub fn homographies(&self) -> Result<Vec<Homography>> {
        (0..self.len()).map(|i| self.homography(i)).collect()
    }

    /// Image with the most observations, lowest index on ties.
    pub fn base_index(&self) -> usize {
        let mut best = 0;
        for (i, img) in self.images.iter().enumerate() {
            if img.points.len() > self.images[best].points.len() {
                best = i;
            }
        }
        best
    }

    /// Affine pixel normalization: centroid of all observations to the origin,
    /// RMS distance to 1.
    pub fn pixel_normalization(&self) -> nalgebra::Matrix3<f64> {
        let all: Vec<_> = self
            .images
            .iter()
            .flat_map(|img| img.points.iter().map(|p| p.pixel()))
            .collect();
        let n = all.len().max(1) as f64;
        let c = all.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
        let rms = (all.iter().map(|p| (p - c).norm_squared()).sum::<f64>() / n).sqrt();
        let s = if rms > 0.0 { 1.0 / rms } else { 1.0 };
        nalgebra::Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
    }
}
