//! Estimate a homography from a synthetic image and decompose it.

use collimcal::geom::{decompose_homography, Distortion};
use collimcal::synth::{generate_scene, SceneSeed, SyntheticConfig};

fn main() -> collimcal::Result<()> {
    let config = SyntheticConfig {
        distortion: Distortion::zero(),
        pixel_noise_sigma: 0.0,
        image_count: 3,
        ..SyntheticConfig::default()
    };
    let scene = generate_scene(&config, SceneSeed::new(0, 0))?;
    let ext = scene.extrinsics();
    for i in 0..scene.observations.len() {
        let h = scene.observations.homography(i)?;
        let pose = decompose_homography(&h, &scene.intrinsics);
        println!(
            "image {i}: {} points, rotation error {:.2e} rad, translation error {:.2e} mm",
            scene.observations.images()[i].points.len(),
            pose.rotation.angle_to(&ext.rotations[i]),
            (pose.translation - ext.translation(i)).norm()
        );
    }
    Ok(())
}
