//! Closed-form intrinsics and optical centre from N collimator images.

use collimcal::geom::Distortion;
use collimcal::multi::solve_closed_form;
use collimcal::synth::{generate_scene, SceneSeed, SyntheticConfig};

fn main() -> collimcal::Result<()> {
    for sigma in [0.0, 0.5, 1.0] {
        let config = SyntheticConfig {
            distortion: Distortion::zero(),
            pixel_noise_sigma: sigma,
            ..SyntheticConfig::default()
        };
        let scene = generate_scene(&config, SceneSeed::new(1, 0))?;
        let (k, ext) = solve_closed_form(&scene.observations)?;
        println!(
            "noise {sigma:.1} px: fx {:.3} fy {:.3} cx {:.3} cy {:.3} skew {:.4}, t_cp ({:.2}, {:.2}, {:.2})",
            k.fx, k.fy, k.cx, k.cy, k.gamma, ext.x, ext.y, -ext.r
        );
    }
    println!("truth: fx 1000 fy 1000 cx 542 cy 478 skew 0.01, t_cp (150, 105, -700)");
    Ok(())
}
