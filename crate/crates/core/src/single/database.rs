use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geom::{back_project, CameraIntrinsics, Distortion, PointObservation};
use crate::{Error, Result};

/// Camera parameters a database was built with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatabaseProvenance {
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
}

/// Unit ray directions of a reference image, keyed by point id.
///
/// Because a collimated pattern is seen at infinity, the angles between these
/// rays are the same from every camera pose, which is what lets a single
/// calibration image be matched against them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDatabase", into = "RawDatabase")]
pub struct RayDatabase {
    entries: BTreeMap<u32, Vector3<f64>>,
    provenance: DatabaseProvenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRay {
    id: u32,
    dir: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDatabase {
    provenance: DatabaseProvenance,
    rays: Vec<RawRay>,
}

impl TryFrom<RawDatabase> for RayDatabase {
    type Error = Error;
    fn try_from(raw: RawDatabase) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for r in raw.rays {
            if entries.insert(r.id, Vector3::from(r.dir)).is_some() {
                return Err(Error::InvalidInput(format!("duplicate ray id {}", r.id)));
            }
        }
        RayDatabase::from_entries(entries, raw.provenance)
    }
}

impl From<RayDatabase> for RawDatabase {
    fn from(db: RayDatabase) -> Self {
        RawDatabase {
            provenance: db.provenance,
            rays: db
                .entries
                .iter()
                .map(|(&id, d)| RawRay {
                    id,
                    dir: [d.x, d.y, d.z],
                })
                .collect(),
        }
    }
}

impl RayDatabase {
    /// Validates that every ray is unit length within `1e-12`.
    pub fn from_entries(
        entries: BTreeMap<u32, Vector3<f64>>,
        provenance: DatabaseProvenance,
    ) -> Result<Self> {
        for (id, d) in &entries {
            if !((d.norm() - 1.0).abs() <= 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "ray {id} is not unit length (norm {})",
                    d.norm()
                )));
            }
        }
        Ok(Self {
            entries,
            provenance,
        })
    }

    pub fn get(&self, id: u32) -> Option<&Vector3<f64>> {
        self.entries.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Vector3<f64>)> {
        self.entries.iter().map(|(&id, d)| (id, d))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provenance(&self) -> &DatabaseProvenance {
        &self.provenance
    }
}

/// Back-projects every reference observation with the known reference camera.
pub fn build_ray_database(
    reference: &[PointObservation],
    k: &CameraIntrinsics,
    d: &Distortion,
) -> Result<RayDatabase> {
    if reference.len() < 8 {
        return Err(Error::Precondition(format!(
            "a ray database needs at least 8 reference points, got {}",
            reference.len()
        )));
    }
    let mut entries = BTreeMap::new();
    for p in reference {
        let ray = back_project(k, d, &p.pixel())?;
        if entries.insert(p.id, ray).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate reference point id {}",
                p.id
            )));
        }
    }
    RayDatabase::from_entries(
        entries,
        DatabaseProvenance {
            intrinsics: *k,
            distortion: *d,
        },
    )
}
