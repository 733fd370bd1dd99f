//! Bundle adjustment on generated scenes.

use approx::assert_relative_eq;
use collimcal::geom::{project_camera_point, CameraIntrinsics, Distortion};
use collimcal::multi::{solve_closed_form, SphericalExtrinsics};
use collimcal::refine::{
    evaluate_spherical, single_image_ba, spherical_ba, spherical_ba_with, BaOptions,
    LeastSquaresProblem, RefinementConfig, SphericalBaProblem, SphericalState,
};
use collimcal::synth::{generate_scene, generate_single_image_scene, SceneSeed, SyntheticConfig};
use nalgebra::Vector3;

fn noisy_config() -> SyntheticConfig {
    SyntheticConfig {
        pixel_noise_sigma: 0.5,
        ..SyntheticConfig::default()
    }
}

#[test]
fn recovers_a_perturbed_start() {
    let scene = generate_scene(&noisy_config(), SceneSeed::new(20, 0)).unwrap();
    let k0 = CameraIntrinsics::new(1030.0, 975.0, 530.0, 490.0, 0.0).unwrap();
    let ext = scene.extrinsics();
    let rotations = ext
        .rotations
        .iter()
        .map(|r| r.retract(&Vector3::new(0.01, -0.01, 0.005)))
        .collect();
    let ext0 = SphericalExtrinsics::from_center(&(scene.center + Vector3::new(15.0, -10.0, 20.0)), rotations).unwrap();
    let cal = spherical_ba(&scene.observations, (&k0, &Distortion::zero(), &ext0), &RefinementConfig::default()).unwrap();
    assert!((cal.intrinsics.fx / scene.intrinsics.fx - 1.0).abs() < 0.01);
    assert!((cal.distortion.d1 - 0.1).abs() < 0.02, "{:?}", cal.distortion);
    assert!((cal.distortion.d2 + 0.2).abs() < 0.05, "{:?}", cal.distortion);
    assert!((cal.report.rms_reprojection - 0.5).abs() < 0.1);
    assert!(cal.report.cost_trajectory.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn ground_truth_is_a_fixed_point_without_noise() {
    let config = SyntheticConfig { pixel_noise_sigma: 0.0, ..SyntheticConfig::default() };
    let scene = generate_scene(&config, SceneSeed::new(21, 0)).unwrap();
    let ext = scene.extrinsics();
    let before = evaluate_spherical(&scene.observations, &scene.intrinsics, &scene.distortion, &ext).unwrap();
    assert!(before.rms_reprojection < 1e-9);
    let cal = spherical_ba(&scene.observations, (&scene.intrinsics, &scene.distortion, &ext), &RefinementConfig::default()).unwrap();
    assert_relative_eq!(cal.intrinsics.fx, scene.intrinsics.fx, max_relative = 1e-9);
    assert_relative_eq!(cal.extrinsics.center(), scene.center, epsilon = 1e-6);
}

#[test]
fn parameter_count_is_ten_plus_three_per_image() {
    let scene = generate_scene(&noisy_config(), SceneSeed::new(22, 0)).unwrap();
    let problem = SphericalBaProblem::new(&scene.observations, BaOptions::default());
    assert_eq!(problem.num_params(), 10 + 3 * scene.observations.len());
    let state = SphericalState::new(&scene.intrinsics, &scene.distortion, &scene.extrinsics());
    assert_eq!(state.scales().len(), problem.num_params());
}

#[test]
fn held_parameters_keep_their_initial_values() {
    let scene = generate_scene(&noisy_config(), SceneSeed::new(23, 0)).unwrap();
    let (k, ext) = solve_closed_form(&scene.observations).unwrap();
    let options = BaOptions { hold_skew: true, freeze_center: true, ..BaOptions::default() };
    let k0 = CameraIntrinsics { gamma: 0.0, ..k };
    let cal = spherical_ba_with(&scene.observations, (&k0, &Distortion::zero(), &ext), &RefinementConfig::default(), &options).unwrap();
    assert_eq!(cal.intrinsics.gamma, 0.0);
    assert_eq!(cal.extrinsics.center(), ext.center());
}

#[test]
fn refinement_from_the_closed_form_improves_the_fit() {
    let scene = generate_scene(&noisy_config(), SceneSeed::new(24, 0)).unwrap();
    let (k, ext) = solve_closed_form(&scene.observations).unwrap();
    let before = evaluate_spherical(&scene.observations, &k, &Distortion::zero(), &ext).unwrap();
    let cal = spherical_ba(&scene.observations, (&k, &Distortion::zero(), &ext), &RefinementConfig::default()).unwrap();
    assert!(cal.report.rms_reprojection < before.rms_reprojection);
    assert!(cal.report.converged);
    assert_eq!(cal.report.per_image_rms.len(), scene.observations.len());
}

#[test]
fn single_image_refinement_recovers_distortion() {
    let reference = CameraIntrinsics::new(900.0, 900.0, 540.0, 480.0, 0.0).unwrap();
    let config = SyntheticConfig { pixel_noise_sigma: 0.1, ..SyntheticConfig::default() };
    let scene = generate_single_image_scene(&config, (&reference, &Distortion::zero()), SceneSeed::new(25, 0)).unwrap();
    let target = &scene.target;
    let pairs: Vec<_> = scene
        .calibration
        .points
        .iter()
        .map(|p| {
            let ray = scene.reference_rotation.apply(&(target.get(p.id).unwrap() - config.center()));
            (ray, p.pixel())
        })
        .collect();
    let k0 = CameraIntrinsics::new(980.0, 980.0, 540.0, 480.0, 0.0).unwrap();
    let r0 = scene.relative_rotation().retract(&Vector3::new(0.01, 0.0, -0.01));
    let (k, d, r, report) = single_image_ba(&pairs, (&k0, &Distortion::zero(), &r0), &RefinementConfig::default(), &BaOptions::default()).unwrap();
    assert!((k.fx / scene.intrinsics.fx - 1.0).abs() < 0.005, "{k:?}");
    // One image constrains the radial profile over the imaged radii, not the
    // two coefficients separately.
    let truth = scene.relative_rotation();
    let worst = pairs
        .iter()
        .map(|(ray, _)| {
            let a = project_camera_point(&k, &d, &r.apply(ray)).unwrap();
            let b = project_camera_point(&scene.intrinsics, &scene.distortion, &truth.apply(ray)).unwrap();
            (a - b).norm()
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.3, "{d:?}: {worst}");
    assert!(r.angle_to(&scene.relative_rotation()) < 1e-3);
    assert!(report.rms_reprojection < 0.2);
}
