//! Refine the closed-form solution with distortion and a robust loss.

use collimcal::geom::Distortion;
use collimcal::multi::solve_closed_form;
use collimcal::refine::{evaluate_spherical, spherical_ba, RefinementConfig};
use collimcal::synth::{generate_scene, SceneSeed, SyntheticConfig};

fn main() -> collimcal::Result<()> {
    let config = SyntheticConfig::default();
    let scene = generate_scene(&config, SceneSeed::new(4, 0))?;
    let (k, ext) = solve_closed_form(&scene.observations)?;
    let before = evaluate_spherical(&scene.observations, &k, &Distortion::zero(), &ext)?;
    let cal = spherical_ba(&scene.observations, (&k, &Distortion::zero(), &ext), &RefinementConfig::default())?;
    println!("closed form: fx {:.3}, RMS {:.3} px", k.fx, before.rms_reprojection);
    println!(
        "refined:     fx {:.3}, d = ({:.4}, {:.4}), t_cp ({:.2}, {:.2}, {:.2}), RMS {:.3} px after {} iterations",
        cal.intrinsics.fx,
        cal.distortion.d1,
        cal.distortion.d2,
        cal.extrinsics.x,
        cal.extrinsics.y,
        -cal.extrinsics.r,
        cal.report.rms_reprojection,
        cal.report.iterations_used
    );
    println!("cost trajectory: {:?}", cal.report.cost_trajectory);
    Ok(())
}
