//! JSON file formats: observations, camera parameters, ray databases and
//! calibration reports. World coordinates are millimetres and image
//! coordinates pixels throughout.

use std::path::Path;

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::geom::{
    CameraIntrinsics, Distortion, ImageObservations, ObservationSet, PlanarTarget, Rotation,
    TargetPoint,
};
use crate::multi::DegeneracyReport;
use crate::refine::RefinementConfig;
use crate::single::RayDatabase;
use crate::{Error, Result};

/// Schema version written and accepted by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub world: String,
    pub image: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            world: "mm".into(),
            image: "px".into(),
        }
    }
}

impl Units {
    fn check(&self) -> Result<()> {
        if self.world != "mm" || self.image != "px" {
            return Err(Error::Format(format!(
                "unsupported units (world '{}', image '{}'); expected mm and px",
                self.world, self.image
            )));
        }
        Ok(())
    }
}

/// Generating parameters of simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
    /// Optical centre `t_cp` in target coordinates.
    pub center: Vector3<f64>,
    /// Per-image rotations, `Pc = R (P - t_cp)`.
    pub rotations: Vec<Rotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationFile {
    pub schema_version: u32,
    #[serde(default)]
    pub units: Units,
    /// `[width, height]` in pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<(f64, f64)>,
    pub target: Vec<TargetPoint>,
    pub images: Vec<ImageObservations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

impl ObservationFile {
    pub fn new(obs: &ObservationSet, image_size: Option<(f64, f64)>, truth: Option<GroundTruth>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            units: Units::default(),
            image_size,
            target: obs.target().points().to_vec(),
            images: obs.images().to_vec(),
            ground_truth: truth,
        }
    }

    /// Validated observation set.
    pub fn observations(&self) -> Result<ObservationSet> {
        check_version(self.schema_version)?;
        self.units.check()?;
        if let Some((w, h)) = self.image_size {
            if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
                return Err(Error::Format("image_size must be positive".into()));
            }
        }
        if let Some(gt) = &self.ground_truth {
            gt.intrinsics.validate()?;
        }
        ObservationSet::new(PlanarTarget::new(self.target.clone())?, self.images.clone())
    }
}

/// Known camera parameters, e.g. of the reference camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub schema_version: u32,
    pub intrinsics: CameraIntrinsics,
    #[serde(default)]
    pub distortion: Distortion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<(f64, f64)>,
}

impl CameraFile {
    pub fn new(k: CameraIntrinsics, d: Distortion, image_size: Option<(f64, f64)>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            intrinsics: k,
            distortion: d,
            image_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        self.intrinsics.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatabaseFile {
    pub schema_version: u32,
    pub database: RayDatabase,
}

/// Camera motion in a calibration report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportExtrinsics {
    /// Shared optical centre and one rotation per image.
    Spherical {
        center: Vector3<f64>,
        rotations: Vec<Rotation>,
    },
    /// Rotation from reference-camera rays to calibration-camera rays.
    Relative { rotation: Rotation },
}

/// Differences to the ground truth of simulated input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthComparison {
    /// Relative errors of `(fx, fy, cx, cy)` and absolute skew error over `fx`.
    pub intrinsics_rel: [f64; 5],
    pub max_intrinsics_rel: f64,
    pub distortion_abs: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_mm: Option<f64>,
}

impl TruthComparison {
    pub fn new(
        k: &CameraIntrinsics,
        d: &Distortion,
        center: Option<Vector3<f64>>,
        truth: &GroundTruth,
    ) -> Self {
        let t = &truth.intrinsics;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        let intrinsics_rel = [
            rel(k.fx, t.fx),
            rel(k.fy, t.fy),
            rel(k.cx, t.cx),
            rel(k.cy, t.cy),
            (k.gamma - t.gamma).abs() / t.fx,
        ];
        Self {
            max_intrinsics_rel: intrinsics_rel.iter().copied().fold(0.0, f64::max),
            intrinsics_rel,
            distortion_abs: [
                (d.d1 - truth.distortion.d1).abs(),
                (d.d2 - truth.distortion.d2).abs(),
            ],
            center_mm: center.map(|c| (c - truth.center).norm()),
        }
    }
}

/// Settings a calibration ran with, enough to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub input: String,
    pub mode: String,
    pub refine: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub refinement: RefinementConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub tool: String,
    pub tool_version: String,
    pub solver: String,
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
    pub extrinsics: ReportExtrinsics,
    pub rms_reprojection: f64,
    pub per_image_rms: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<DegeneracyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_vs_truth: Option<TruthComparison>,
    pub config: ConfigEcho,
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Parses JSON, reporting syntax and type errors with line and column.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        Error::Format(format!("{what}: {e}"))
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// 1-based line of the first occurrence of `"field"` in `text`.
pub fn field_line(text: &str, field: &str) -> Option<usize> {
    let needle = format!("\"{field}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

pub fn load_observations(path: &Path) -> Result<(ObservationFile, ObservationSet)> {
    let file: ObservationFile = read_json(path)?;
    let obs = file.observations()?;
    Ok((file, obs))
}

pub fn load_camera(path: &Path) -> Result<CameraFile> {
    let file: CameraFile = read_json(path)?;
    file.validate()?;
    Ok(file)
}

pub fn load_database(path: &Path) -> Result<RayDatabase> {
    let file: DatabaseFile = read_json(path)?;
    check_version(file.schema_version)?;
    Ok(file.database)
}

pub fn save_database(path: &Path, db: &RayDatabase) -> Result<()> {
    write_json(
        path,
        &DatabaseFile {
            schema_version: SCHEMA_VERSION,
            database: db.clone(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "schema_version": 1,
  "target": [
    {"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 30, "y": 0},
    {"id": 2, "x": 0, "y": 30}, {"id": 3, "x": 30, "y": 30}
  ],
  "images": [
    {"name": "a", "points": [
      {"id": 0, "u": 100, "v": 100}, {"id": 1, "u": 140, "v": 101},
      {"id": 2, "u": 99, "v": 141}, {"id": 3, "u": 142, "v": 143}
    ]}
  ]
}"#;

    #[test]
    fn minimal_file_parses_with_default_units() {
        let f: ObservationFile = parse_json(MINIMAL, "test").unwrap();
        let obs = f.observations().unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(f.units, Units::default());
    }

    #[test]
    fn unknown_point_id_is_rejected() {
        let bad = MINIMAL.replace(r#"{"id": 3, "u": 142"#, r#"{"id": 9, "u": 142"#);
        let f: ObservationFile = parse_json(&bad, "test").unwrap();
        assert!(f.observations().is_err());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let bad = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 7");
        let f: ObservationFile = parse_json(&bad, "test").unwrap();
        assert_eq!(f.observations().unwrap_err().kind(), "format");
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let bad = MINIMAL.replace("\"images\"", "images");
        let e = parse_json::<ObservationFile>(&bad, "obs.json").unwrap_err();
        assert!(e.to_string().contains("line 7"), "{e}");
    }

    #[test]
    fn field_line_locates_keys() {
        assert_eq!(field_line(MINIMAL, "images"), Some(7));
        assert_eq!(field_line(MINIMAL, "nothing"), None);
    }
}
