//! Calibration from one image of a collimated target.
//!
//! A reference camera with known parameters records the pattern once; its
//! back-projected rays form a [`RayDatabase`]. Any other camera can then be
//! calibrated from a single image by matching point ids: a closed-form focal
//! guess, refinement of all intrinsics from pair angles, a Kabsch rotation,
//! and a final joint refinement that also estimates distortion.

mod angle;
mod database;
mod kabsch;
mod pairs;
mod quartic;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use angle::{refine_intrinsics_angle, AngleProblem};
pub use database::{build_ray_database, DatabaseProvenance, RayDatabase};
pub use kabsch::estimate_rotation_kabsch;
pub use pairs::PairStrategy;
pub use quartic::{init_focal_quartic, init_focal_with_pairs, quartic_coefficients};

use crate::geom::{back_project, CameraIntrinsics, Distortion, PointObservation, Rotation};
use crate::refine::{evaluate_single_image, single_image_ba, BaOptions, RefinementConfig, ResidualReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingleImageConfig {
    /// Image size in pixels; its centre seeds the principal point.
    pub image_size: (f64, f64),
    pub refine: RefinementConfig,
    pub pairs: PairStrategy,
    /// Keep skew at zero during the angle refinement.
    pub hold_skew_in_angle: bool,
    pub ba: BaOptions,
    /// Skip the final joint refinement.
    pub skip_ba: bool,
}

impl Default for SingleImageConfig {
    fn default() -> Self {
        Self {
            image_size: (1080.0, 960.0),
            refine: RefinementConfig::default(),
            pairs: PairStrategy::default(),
            hold_skew_in_angle: false,
            ba: BaOptions::default(),
            skip_ba: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleImageResult {
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
    /// Maps reference-camera rays into the calibration camera.
    pub rotation: Rotation,
    pub report: ResidualReport,
    /// Focal length from the closed-form initialization.
    pub initial_focal: f64,
    /// Intrinsics after the angle refinement, before the joint refinement.
    pub angle_intrinsics: CameraIntrinsics,
    pub matched_points: usize,
    /// Calibration observations without a database entry.
    pub unmatched_points: usize,
}

/// Calibration pixel and database ray of one target point.
pub type Correspondence = (Vector2<f64>, Vector3<f64>);

/// `(calibration pixel, database ray)` pairs for the ids present in both.
pub fn match_observations(
    observations: &[PointObservation],
    database: &RayDatabase,
) -> (Vec<Correspondence>, usize) {
    let mut matched = Vec::new();
    let mut dropped = 0;
    for p in observations {
        match database.get(p.id) {
            Some(ray) => matched.push((p.pixel(), *ray)),
            None => dropped += 1,
        }
    }
    (matched, dropped)
}

pub fn calibrate_single_image(
    observations: &[PointObservation],
    database: &RayDatabase,
    config: &SingleImageConfig,
) -> Result<SingleImageResult> {
    let (corr, unmatched) = match_observations(observations, database);
    if corr.len() < 8 {
        return Err(Error::Precondition(format!(
            "single-image calibration needs at least 8 matched points, got {}",
            corr.len()
        )));
    }
    let pairs = config.pairs.pairs(corr.len());
    let (w, h) = config.image_size;

    let f0 = quartic::init_focal_with_pairs(&corr, w, h, &pairs)
        .map_err(|e| e.in_stage("focal initialization"))?;
    let k0 = CameraIntrinsics::new(f0, f0, w / 2.0, h / 2.0, 0.0)
        .map_err(|e| e.in_stage("focal initialization"))?;

    let k1 = refine_intrinsics_angle(&corr, &k0, pairs, &config.refine, config.hold_skew_in_angle)
        .map_err(|e| e.in_stage("angle refinement"))?;

    let calib_rays = corr
        .iter()
        .map(|(p, _)| back_project(&k1, &Distortion::zero(), p))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("rotation estimation"))?;
    let db_rays: Vec<_> = corr.iter().map(|c| c.1).collect();
    let r0 = estimate_rotation_kabsch(&calib_rays, &db_rays)
        .map_err(|e| e.in_stage("rotation estimation"))?;

    let pairs_ba: Vec<_> = corr.iter().map(|(p, ray)| (*ray, *p)).collect();
    let d0 = Distortion::zero();
    let (k, d, rotation, report) = if config.skip_ba {
        let report = evaluate_single_image(&pairs_ba, &k1, &d0, &r0)
            .map_err(|e| e.in_stage("bundle adjustment"))?;
        (k1, d0, r0, report)
    } else {
        single_image_ba(&pairs_ba, (&k1, &d0, &r0), &config.refine, &config.ba)
            .map_err(|e| e.in_stage("bundle adjustment"))?
    };
    Ok(SingleImageResult {
        intrinsics: k,
        distortion: d,
        rotation,
        report,
        initial_focal: f0,
        angle_intrinsics: k1,
        matched_points: corr.len(),
        unmatched_points: unmatched,
    })
}
