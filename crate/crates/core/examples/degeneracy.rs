//! Detect rotations about the target normal and repeated views.

use collimcal::geom::{Distortion, ObservationSet, Rotation};
use collimcal::multi::detect_degeneracy;
use collimcal::synth::{generate_scene, render_image, SceneSeed, SyntheticConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> collimcal::Result<()> {
    let config = SyntheticConfig {
        distortion: Distortion::zero(),
        pixel_noise_sigma: 0.0,
        image_count: 4,
        ..SyntheticConfig::default()
    };
    let scene = generate_scene(&config, SceneSeed::new(3, 0))?;
    let report = detect_degeneracy(&scene.observations)?;
    println!("4 generic images: flagged {}, rank {}", report.is_flagged(), report.spherical_rank);

    let rot = scene.rotations[0] * Rotation::about_z(0.4);
    let copy = render_image(
        "z-rotated".into(),
        (&config.intrinsics, &config.distortion),
        (&rot, &config.center()),
        &config.planar_target()?,
        config.image_size,
        0.0,
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    let mut images = scene.observations.images().to_vec();
    images.push(copy);
    images.push(scene.observations.images()[1].clone());
    let extended = ObservationSet::new(scene.observations.target().clone(), images)?;
    let report = detect_degeneracy(&extended)?;
    println!(
        "with a z-rotated copy and a repeated view: z-rotation pairs {:?}, repeated pairs {:?}, rank {}",
        report.z_rotation_pairs, report.pure_translation_pairs, report.spherical_rank
    );
    Ok(())
}
