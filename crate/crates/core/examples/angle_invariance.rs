//! Properties of spherical motion: pair angles, camera distance and the
//! uniqueness of the orthogonal viewpoint.

use collimcal::synth::{
    generate_scene, pair_angle_spread, search_orthogonal_offsets, sphere_deviation, SceneSeed,
    SyntheticConfig,
};
use nalgebra::Vector3;

fn main() -> collimcal::Result<()> {
    let config = SyntheticConfig::default();
    let scene = generate_scene(&config, SceneSeed::new(7, 0))?;
    let ext = scene.extrinsics();
    let a = Vector3::new(0.0, 0.0, 0.0);
    let b = Vector3::new(300.0, 210.0, 0.0);
    println!("pair angle spread across 15 poses: {:.2e} rad", pair_angle_spread(&ext, &a, &b)?);
    println!("max |det(M) - r|: {:.2e}", sphere_deviation(&ext));

    let search = search_orthogonal_offsets(config.radius, 7)?;
    for t in &search.roots {
        println!("offset keeping the triplet orthogonal: ({:.3}, {:.3}, {:.3})", t.x, t.y, t.z);
    }
    println!("origin is the only admissible offset: {}", search.origin_is_unique());
    Ok(())
}
