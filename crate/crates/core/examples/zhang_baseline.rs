//! Plane-based baseline next to the spherical closed form on the same images.

use collimcal::geom::Distortion;
use collimcal::multi::solve_closed_form;
use collimcal::synth::{generate_scene, zhang_init, SceneSeed, SyntheticConfig};

fn main() -> collimcal::Result<()> {
    let config = SyntheticConfig {
        distortion: Distortion::zero(),
        pixel_noise_sigma: 1.0,
        ..SyntheticConfig::default()
    };
    let (mut ours, mut zhang) = (0.0, 0.0);
    let trials = 20;
    for trial in 0..trials {
        let scene = generate_scene(&config, SceneSeed::new(6, trial))?;
        ours += (solve_closed_form(&scene.observations)?.0.fx / 1000.0 - 1.0).abs();
        zhang += (zhang_init(&scene.observations)?.fx / 1000.0 - 1.0).abs();
    }
    println!(
        "mean focal error over {trials} trials at 1 px: spherical {:.3}%, plane-based {:.3}%",
        100.0 * ours / trials as f64,
        100.0 * zhang / trials as f64
    );
    Ok(())
}
