//! Calibrate a camera from one image using a ray database from another camera.

use collimcal::geom::{CameraIntrinsics, Distortion};
use collimcal::single::{build_ray_database, calibrate_single_image, SingleImageConfig};
use collimcal::synth::{generate_single_image_scene, SceneSeed, SyntheticConfig};

fn main() -> collimcal::Result<()> {
    let reference = CameraIntrinsics::new(900.0, 900.0, 540.0, 480.0, 0.0)?;
    let config = SyntheticConfig::default();
    let scene = generate_single_image_scene(&config, (&reference, &Distortion::zero()), SceneSeed::new(5, 0))?;
    let db = build_ray_database(&scene.reference.points, &reference, &Distortion::zero())?;
    let cal = calibrate_single_image(&scene.calibration.points, &db, &SingleImageConfig::default())?;
    println!("database: {} rays", db.len());
    println!("quartic focal init: {:.2}", cal.initial_focal);
    println!(
        "after angle refinement: fx {:.2} fy {:.2} cx {:.2} cy {:.2}",
        cal.angle_intrinsics.fx, cal.angle_intrinsics.fy, cal.angle_intrinsics.cx, cal.angle_intrinsics.cy
    );
    println!(
        "final: fx {:.3} fy {:.3} cx {:.3} cy {:.3}, d = ({:.4}, {:.4}), RMS {:.3} px",
        cal.intrinsics.fx,
        cal.intrinsics.fy,
        cal.intrinsics.cx,
        cal.intrinsics.cy,
        cal.distortion.d1,
        cal.distortion.d2,
        cal.report.rms_reprojection
    );
    println!(
        "relative rotation error: {:.2e} rad",
        cal.rotation.angle_to(&scene.relative_rotation())
    );
    Ok(())
}
