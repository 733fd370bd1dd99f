//! Two-image minimal solver and its candidate roots.

use collimcal::geom::Distortion;
use collimcal::multi::solve_minimal_detailed;
use collimcal::synth::{generate_scene, SceneSeed, SyntheticConfig};

fn main() -> collimcal::Result<()> {
    let config = SyntheticConfig {
        distortion: Distortion::zero(),
        pixel_noise_sigma: 0.0,
        image_count: 2,
        ..SyntheticConfig::default()
    };
    let scene = generate_scene(&config, SceneSeed::new(2, 0))?;
    let report = solve_minimal_detailed(&scene.observations)?;
    println!("hidden-variable roots: {:?}", report.roots);
    for (i, c) in report.candidates.iter().enumerate() {
        let k = c.intrinsics;
        println!(
            "candidate {i}: residual {:.2e}, fx {:.4} fy {:.4} cx {:.4} cy {:.4}, radius {:.4}",
            c.residual, k.fx, k.fy, k.cx, k.cy, c.extrinsics.r
        );
    }
    Ok(())
}
