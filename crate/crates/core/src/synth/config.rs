use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geom::{CameraIntrinsics, Distortion, PlanarTarget};
use crate::refine::RefinementConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub cols: usize,
    pub rows: usize,
    /// Point spacing in millimetres.
    pub pitch_mm: f64,
}

/// Values visited by each benchmark sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepValues {
    /// Pixel noise standard deviations, in pixels.
    pub noise: Vec<f64>,
    /// Image counts.
    pub images: Vec<usize>,
    /// Optical-centre perturbation standard deviations, in millimetres.
    pub spherical: Vec<f64>,
}

impl Default for SweepValues {
    fn default() -> Self {
        Self {
            noise: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            images: vec![3, 5, 10, 15, 20, 25, 30],
            spherical: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        }
    }
}

/// Solvers run by the benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSelection {
    pub ours: bool,
    pub zhang: bool,
    /// Also run bundle adjustment after each initializer.
    pub refine: bool,
}

impl Default for SolverSelection {
    fn default() -> Self {
        Self {
            ours: true,
            zhang: true,
            refine: true,
        }
    }
}

/// Synthetic camera, target, motion and noise model.
///
/// Defaults: a 1080x960 camera with `f = 1000`, principal point `(542, 478)`,
/// skew `0.01` and distortion `(0.1, -0.2)`, an 11x8 grid at 30 mm pitch, and
/// spherical motion of radius 700 mm about `t_cp = (150, 105, -700)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
    /// `(width, height)` in pixels.
    pub image_size: (f64, f64),
    pub target: GridSpec,
    /// Spherical radius in millimetres.
    pub radius: f64,
    /// In-plane position `(x, y)` of the optical centre in millimetres.
    pub target_offset: (f64, f64),
    pub pixel_noise_sigma: f64,
    pub spherical_noise_sigma: f64,
    pub image_count: usize,
    pub trial_count: usize,
    pub rng_seed: u64,
    /// Largest rotation away from the fronto-parallel pose, in degrees.
    pub max_tilt_deg: f64,
    pub min_visible_points: usize,
    pub max_resample_attempts: usize,
    /// Require every target point to be visible (single-image scenes).
    pub require_full_visibility: bool,
    pub sweeps: SweepValues,
    pub solvers: SolverSelection,
    pub refine: RefinementConfig,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics {
                fx: 1000.0,
                fy: 1000.0,
                cx: 542.0,
                cy: 478.0,
                gamma: 0.01,
            },
            distortion: Distortion::new(0.1, -0.2),
            image_size: (1080.0, 960.0),
            target: GridSpec {
                cols: 11,
                rows: 8,
                pitch_mm: 30.0,
            },
            radius: 700.0,
            target_offset: (150.0, 105.0),
            pixel_noise_sigma: 0.5,
            spherical_noise_sigma: 0.0,
            image_count: 15,
            trial_count: 200,
            rng_seed: 0,
            max_tilt_deg: 30.0,
            min_visible_points: 20,
            max_resample_attempts: 100,
            require_full_visibility: false,
            sweeps: SweepValues::default(),
            solvers: SolverSelection::default(),
            refine: RefinementConfig::default(),
        }
    }
}

impl SyntheticConfig {
    /// Optical centre `t_cp = (x, y, -r)` in target coordinates.
    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(self.target_offset.0, self.target_offset.1, -self.radius)
    }

    pub fn planar_target(&self) -> Result<PlanarTarget> {
        PlanarTarget::grid(self.target.cols, self.target.rows, self.target.pitch_mm)
    }

    /// Checks every field; the error names the offending field first.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::InvalidInput(format!("{field}: {why}")));
        if let Err(e) = self.intrinsics.validate() {
            return bad("intrinsics", e.to_string());
        }
        let (w, h) = self.image_size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return bad("image_size", "must be positive".into());
        }
        if let Err(e) = Distortion::checked(
            self.distortion.d1,
            self.distortion.d2,
            &self.intrinsics,
            self.image_size,
        ) {
            return bad("distortion", e.to_string());
        }
        if self.target.cols < 2 || self.target.rows < 2 || !(self.target.pitch_mm > 0.0) {
            return bad("target", "needs at least 2x2 points and a positive pitch".into());
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius", format!("must be positive, got {}", self.radius));
        }
        if !(self.target_offset.0.is_finite() && self.target_offset.1.is_finite()) {
            return bad("target_offset", "must be finite".into());
        }
        if !(self.pixel_noise_sigma >= 0.0 && self.pixel_noise_sigma.is_finite()) {
            return bad("pixel_noise_sigma", "must be non-negative".into());
        }
        if !(self.spherical_noise_sigma >= 0.0 && self.spherical_noise_sigma.is_finite()) {
            return bad("spherical_noise_sigma", "must be non-negative".into());
        }
        if self.image_count < 1 {
            return bad("image_count", "must be at least 1".into());
        }
        if self.trial_count < 1 {
            return bad("trial_count", "must be at least 1".into());
        }
        if !(self.max_tilt_deg > 0.0 && self.max_tilt_deg < 90.0) {
            return bad("max_tilt_deg", "must lie in (0, 90)".into());
        }
        if self.min_visible_points < 4 {
            return bad("min_visible_points", "must be at least 4".into());
        }
        if self.max_resample_attempts < 1 {
            return bad("max_resample_attempts", "must be at least 1".into());
        }
        if self.sweeps.noise.iter().any(|v| !(*v >= 0.0))
            || self.sweeps.spherical.iter().any(|v| !(*v >= 0.0))
            || self.sweeps.images.iter().any(|v| *v < 1)
        {
            return bad("sweeps", "values must be non-negative counts or sigmas".into());
        }
        if let Err(e) = self.refine.validate() {
            return bad("refine", e.to_string());
        }
        Ok(())
    }

    /// Field name named by a [`Self::validate`] error.
    pub fn field_of(error: &Error) -> Option<String> {
        match error {
            Error::InvalidInput(msg) => msg.split(':').next().map(str::to_string),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = SyntheticConfig::default();
        c.validate().unwrap();
        assert_eq!(c.planar_target().unwrap().len(), 88);
        assert_eq!(c.center(), Vector3::new(150.0, 105.0, -700.0));
    }

    #[test]
    fn errors_name_the_field() {
        let c = SyntheticConfig {
            radius: -1.0,
            ..Default::default()
        };
        let e = c.validate().unwrap_err();
        assert_eq!(SyntheticConfig::field_of(&e).as_deref(), Some("radius"));
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: SyntheticConfig = serde_json::from_str(r#"{"image_count": 3}"#).unwrap();
        assert_eq!(c.image_count, 3);
        assert_eq!(c.radius, 700.0);
        assert!(serde_json::from_str::<SyntheticConfig>(r#"{"radious": 3}"#).is_err());
    }
}
