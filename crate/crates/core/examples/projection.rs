//! Project target points through a distorted camera and back again.

use collimcal::geom::{back_project, project, CameraIntrinsics, Distortion, Rotation};
use nalgebra::Vector3;

fn main() -> collimcal::Result<()> {
    let k = CameraIntrinsics::new(1000.0, 1000.0, 542.0, 478.0, 0.01)?;
    let d = Distortion::new(0.1, -0.2);
    let rot = Rotation::exp(&Vector3::new(0.1, -0.05, 0.2));
    let center = Vector3::new(150.0, 105.0, -700.0);
    let t = -rot.apply(&center);

    for p in [Vector3::new(0.0, 0.0, 0.0), Vector3::new(300.0, 210.0, 0.0)] {
        let uv = project(&k, &d, &rot, &t, &p)?;
        let ray = back_project(&k, &d, &uv)?;
        let truth = rot.apply(&(p - center)).normalize();
        println!(
            "target ({:6.1}, {:6.1}) -> pixel ({:8.3}, {:8.3}), ray error {:.2e} rad",
            p.x,
            p.y,
            uv.x,
            uv.y,
            collimcal::angular_distance(&ray, &truth)?
        );
    }
    Ok(())
}
