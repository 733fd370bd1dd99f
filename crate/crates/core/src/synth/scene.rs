use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SyntheticConfig;
use crate::geom::{
    project, CameraIntrinsics, Distortion, ImageObservations, ObservationSet, PlanarTarget,
    PointObservation, Rotation,
};
use crate::multi::SphericalExtrinsics;
use crate::{Error, Result};

/// Independent random stream for one quantity of one image of one trial.
///
/// Streams depend on the seed, trial and image only, so a trial sees the same
/// rotations and the same unit noise draws at every sweep value and every
/// image count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneSeed {
    pub seed: u64,
    pub trial: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Rotation = 0,
    Center = 1,
    Pixel = 2,
}

impl SceneSeed {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    pub fn stream(&self, image: usize, kind: StreamKind) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.trial << 20) | ((image as u64) << 2) | kind as u64);
        rng
    }
}

fn normal3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

fn in_image(uv: &Vector2<f64>, (w, h): (f64, f64)) -> bool {
    uv.x >= 0.0 && uv.x < w && uv.y >= 0.0 && uv.y < h
}

/// Number of target points a camera at `center` with orientation `rotation`
/// images inside the frame, without noise.
pub fn visible_count(
    config: &SyntheticConfig,
    target: &PlanarTarget,
    rotation: &Rotation,
    center: &Vector3<f64>,
) -> usize {
    let t = -rotation.apply(center);
    target
        .points()
        .iter()
        .filter(|p| {
            let pt = Vector3::new(p.x, p.y, 0.0);
            project(&config.intrinsics, &config.distortion, rotation, &t, &pt)
                .map(|uv| in_image(&uv, config.image_size))
                .unwrap_or(false)
        })
        .count()
}

/// Rotation with a uniformly distributed axis and an angle uniform in
/// `[0, max_tilt]` from the fronto-parallel orientation, resampled until the
/// visibility requirement holds at the nominal optical centre.
pub fn sample_rotation<R: Rng + ?Sized>(
    config: &SyntheticConfig,
    target: &PlanarTarget,
    rng: &mut R,
) -> Result<Rotation> {
    let needed = if config.require_full_visibility {
        target.len()
    } else {
        config.min_visible_points.min(target.len())
    };
    let center = config.center();
    let max_angle = config.max_tilt_deg.to_radians();
    for _ in 0..config.max_resample_attempts {
        let axis = loop {
            let v = normal3(rng);
            if v.norm() > 1e-9 {
                break v.normalize();
            }
        };
        let angle = rng.random::<f64>() * max_angle;
        let rot = Rotation::exp(&(axis * angle));
        if visible_count(config, target, &rot, &center) >= needed {
            return Ok(rot);
        }
    }
    Err(Error::ConeTooWide {
        attempts: config.max_resample_attempts,
    })
}

/// Per-image optical centre: the nominal one plus isotropic Gaussian noise.
pub fn sample_center<R: Rng + ?Sized>(config: &SyntheticConfig, rng: &mut R) -> Vector3<f64> {
    let z = normal3(rng);
    config.center() + z * config.spherical_noise_sigma
}

/// Rotations and per-image optical centres for `config.image_count` images.
pub fn generate_spherical_poses<R: Rng + ?Sized>(
    config: &SyntheticConfig,
    rng: &mut R,
) -> Result<Vec<(Rotation, Vector3<f64>)>> {
    let target = config.planar_target()?;
    (0..config.image_count)
        .map(|_| {
            let rot = sample_rotation(config, &target, rng)?;
            Ok((rot, sample_center(config, rng)))
        })
        .collect()
}

/// Projects every target point and adds Gaussian pixel noise.
///
/// Two unit normal draws are consumed for every target point, visible or not,
/// so the noise of a given point does not depend on which others were dropped.
/// Points behind the camera or outside the frame after noise are dropped.
pub fn render_image<R: Rng + ?Sized>(
    name: String,
    camera: (&CameraIntrinsics, &Distortion),
    pose: (&Rotation, &Vector3<f64>),
    target: &PlanarTarget,
    image_size: (f64, f64),
    sigma: f64,
    rng: &mut R,
) -> ImageObservations {
    let (k, d) = camera;
    let (rot, center) = pose;
    let t = -rot.apply(center);
    let mut points = Vec::with_capacity(target.len());
    for p in target.points() {
        let noise = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * sigma;
        let pt = Vector3::new(p.x, p.y, 0.0);
        if let Ok(uv) = project(k, d, rot, &t, &pt) {
            let uv = uv + noise;
            if in_image(&uv, image_size) {
                points.push(PointObservation { id: p.id, u: uv.x, v: uv.y });
            }
        }
    }
    ImageObservations { name, points }
}

/// Renders one image per pose with the configured camera and pixel noise.
pub fn render_observations<R: Rng + ?Sized>(
    poses: &[(Rotation, Vector3<f64>)],
    config: &SyntheticConfig,
    rng: &mut R,
) -> Result<ObservationSet> {
    let target = config.planar_target()?;
    let images = poses
        .iter()
        .enumerate()
        .map(|(i, (rot, c))| {
            render_image(
                image_name(i),
                (&config.intrinsics, &config.distortion),
                (rot, c),
                &target,
                config.image_size,
                config.pixel_noise_sigma,
                rng,
            )
        })
        .collect();
    ObservationSet::new(target, images)
}

fn image_name(i: usize) -> String {
    format!("img{i:03}")
}

/// Multi-image scene with its generating parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
    /// Nominal optical centre.
    pub center: Vector3<f64>,
    /// Optical centre actually used for each image.
    pub image_centers: Vec<Vector3<f64>>,
    pub rotations: Vec<Rotation>,
    pub observations: ObservationSet,
}

impl SyntheticScene {
    /// Generating extrinsics with the nominal optical centre.
    pub fn extrinsics(&self) -> SphericalExtrinsics {
        SphericalExtrinsics::from_center(&self.center, self.rotations.clone())
            .expect("validated radius")
    }
}

/// Scene for one Monte Carlo trial, drawn from per-image streams.
pub fn generate_scene(config: &SyntheticConfig, seed: SceneSeed) -> Result<SyntheticScene> {
    let target = config.planar_target()?;
    let mut rotations = Vec::with_capacity(config.image_count);
    let mut centers = Vec::with_capacity(config.image_count);
    let mut images = Vec::with_capacity(config.image_count);
    for i in 0..config.image_count {
        let rot = sample_rotation(config, &target, &mut seed.stream(i, StreamKind::Rotation))?;
        let c = sample_center(config, &mut seed.stream(i, StreamKind::Center));
        images.push(render_image(
            image_name(i),
            (&config.intrinsics, &config.distortion),
            (&rot, &c),
            &target,
            config.image_size,
            config.pixel_noise_sigma,
            &mut seed.stream(i, StreamKind::Pixel),
        ));
        rotations.push(rot);
        centers.push(c);
    }
    Ok(SyntheticScene {
        intrinsics: config.intrinsics,
        distortion: config.distortion,
        center: config.center(),
        image_centers: centers,
        rotations,
        observations: ObservationSet::new(target, images)?,
    })
}

/// Reference and calibration images of one collimated target.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleImageScene {
    pub target: PlanarTarget,
    pub reference_intrinsics: CameraIntrinsics,
    pub reference_distortion: Distortion,
    pub reference_rotation: Rotation,
    /// Noiseless reference image.
    pub reference: ImageObservations,
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
    pub rotation: Rotation,
    /// Calibration image with the configured pixel noise.
    pub calibration: ImageObservations,
}

impl SingleImageScene {
    /// Rotation taking reference-camera rays to calibration-camera rays.
    pub fn relative_rotation(&self) -> Rotation {
        self.rotation * self.reference_rotation.transpose()
    }
}

/// Single-image scene: a known reference camera and the configured camera
/// both see every target point.
pub fn generate_single_image_scene(
    config: &SyntheticConfig,
    reference: (&CameraIntrinsics, &Distortion),
    seed: SceneSeed,
) -> Result<SingleImageScene> {
    let target = config.planar_target()?;
    let full = SyntheticConfig {
        require_full_visibility: true,
        ..config.clone()
    };
    let ref_config = SyntheticConfig {
        intrinsics: *reference.0,
        distortion: *reference.1,
        ..full.clone()
    };
    let center = config.center();
    let ref_rot = sample_rotation(&ref_config, &target, &mut seed.stream(0, StreamKind::Rotation))?;
    let rot = sample_rotation(&full, &target, &mut seed.stream(1, StreamKind::Rotation))?;
    let reference_image = render_image(
        "reference".into(),
        reference,
        (&ref_rot, &center),
        &target,
        config.image_size,
        0.0,
        &mut seed.stream(0, StreamKind::Pixel),
    );
    let calibration = render_image(
        "calibration".into(),
        (&config.intrinsics, &config.distortion),
        (&rot, &center),
        &target,
        config.image_size,
        config.pixel_noise_sigma,
        &mut seed.stream(1, StreamKind::Pixel),
    );
    Ok(SingleImageScene {
        target,
        reference_intrinsics: *reference.0,
        reference_distortion: *reference.1,
        reference_rotation: ref_rot,
        reference: reference_image,
        intrinsics: config.intrinsics,
        distortion: config.distortion,
        rotation: rot,
        calibration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::back_project;

    fn noiseless() -> SyntheticConfig {
        SyntheticConfig {
            pixel_noise_sigma: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_spherical_noise_shares_the_centre() {
        let c = noiseless();
        let poses = generate_spherical_poses(&c, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(poses.len(), 15);
        assert!(poses.iter().all(|(_, t)| *t == c.center()));
    }

    #[test]
    fn motion_matrix_determinant_is_radius() {
        let scene = generate_scene(&noiseless(), SceneSeed::new(3, 0)).unwrap();
        let ext = scene.extrinsics();
        for i in 0..ext.rotations.len() {
            assert!((ext.motion_matrix(i).determinant() - 700.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fully_visible_image_has_88_points() {
        let c = SyntheticConfig {
            require_full_visibility: true,
            image_count: 5,
            ..noiseless()
        };
        let scene = generate_scene(&c, SceneSeed::new(5, 2)).unwrap();
        assert!(scene.observations.images().iter().all(|im| im.points.len() == 88));
    }

    #[test]
    fn noiseless_pixels_back_project_to_target_rays() {
        let scene = generate_scene(&noiseless(), SceneSeed::new(9, 1)).unwrap();
        let obs = &scene.observations;
        for i in 0..obs.len() {
            let rot = &scene.rotations[i];
            for (p, uv) in obs.correspondences(i) {
                let ray = back_project(&scene.intrinsics, &scene.distortion, &uv).unwrap();
                let truth = rot.apply(&(p - scene.center)).normalize();
                assert!((ray - truth).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn pixel_noise_has_configured_spread() {
        let c = SyntheticConfig {
            image_count: 120,
            ..Default::default()
        };
        let clean = generate_scene(&SyntheticConfig { pixel_noise_sigma: 0.0, ..c.clone() }, SceneSeed::new(4, 0))
            .unwrap();
        let noisy = generate_scene(&c, SceneSeed::new(4, 0)).unwrap();
        let mut d = Vec::new();
        for (a, b) in clean.observations.images().iter().zip(noisy.observations.images()) {
            for p in &b.points {
                if let Some(q) = a.points.iter().find(|q| q.id == p.id) {
                    d.push(p.u - q.u);
                    d.push(p.v - q.v);
                }
            }
        }
        assert!(d.len() >= 10_000);
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.45..=0.55).contains(&std), "std {std}");
    }

    #[test]
    fn streams_nest_across_image_counts() {
        let small = generate_scene(&SyntheticConfig { image_count: 3, ..Default::default() }, SceneSeed::new(7, 4))
            .unwrap();
        let large = generate_scene(&SyntheticConfig { image_count: 10, ..Default::default() }, SceneSeed::new(7, 4))
            .unwrap();
        assert_eq!(small.rotations[..], large.rotations[..3]);
        assert_eq!(small.observations.images()[..], large.observations.images()[..3]);
    }

    #[test]
    fn impossible_cone_is_reported() {
        let c = SyntheticConfig {
            min_visible_points: 88,
            radius: 100.0,
            max_resample_attempts: 5,
            ..Default::default()
        };
        assert!(matches!(
            generate_scene(&c, SceneSeed::new(0, 0)),
            Err(Error::ConeTooWide { attempts: 5 })
        ));
    }

    #[test]
    fn single_image_scene_is_fully_visible() {
        let c = SyntheticConfig::default();
        let s = generate_single_image_scene(&c, (&c.intrinsics, &Distortion::zero()), SceneSeed::new(2, 0))
            .unwrap();
        assert_eq!(s.reference.points.len(), 88);
        assert_eq!(s.calibration.points.len(), 88);
    }
}
