//! End-to-end runs of the `collimcal` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use collimcal::io::CalibrationReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collimcal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn collimcal")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, name: &str, body: &str) -> PathBuf {
    let cfg = write_config(dir, &format!("{name}.config.json"), body);
    let out = dir.join(format!("{name}.obs.json"));
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn report(path: &Path) -> CalibrationReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_then_calibrate_nimg() {
    let dir = tempfile::tempdir().unwrap();
    let obs = simulate(dir.path(), "nimg", r#"{"pixel_noise_sigma": 0.2}"#);
    let out = dir.path().join("report.json");
    let o = run(&["calibrate", "--in", s(&obs), "--mode", "nimg", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r.solver, "closed_form+ba");
    let truth = r.error_vs_truth.expect("ground truth comparison");
    assert!(truth.max_intrinsics_rel < 0.01, "{truth:?}");
    assert!(r.rms_reprojection < 0.5);
}

#[test]
fn minimal_mode_on_two_images() {
    let dir = tempfile::tempdir().unwrap();
    let obs = simulate(
        dir.path(),
        "pair",
        r#"{"image_count": 2, "pixel_noise_sigma": 0.0, "distortion": {"d1": 0.0, "d2": 0.0}}"#,
    );
    let out = dir.path().join("report.json");
    let o = run(&["calibrate", "--in", s(&obs), "--mode", "minimal", "--no-refine", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r.solver, "minimal");
    assert!(r.error_vs_truth.unwrap().max_intrinsics_rel < 1e-6);
}

#[test]
fn wrong_image_count_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let obs = simulate(dir.path(), "short", r#"{"image_count": 2}"#);
    let out = dir.path().join("report.json");
    let o = run(&["calibrate", "--in", s(&obs), "--mode", "nimg", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn single_image_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let reference_cfg = write_config(
        dir.path(),
        "ref.json",
        r#"{"image_count": 1, "pixel_noise_sigma": 0.0, "rng_seed": 3,
            "intrinsics": {"fx": 900.0, "fy": 900.0, "cx": 540.0, "cy": 480.0, "gamma": 0.0},
            "distortion": {"d1": 0.0, "d2": 0.0}, "require_full_visibility": true}"#,
    );
    let ref_obs = dir.path().join("ref.obs.json");
    let ref_cam = dir.path().join("ref.cam.json");
    let o = run(&["simulate", "--config", s(&reference_cfg), "--out", s(&ref_obs), "--camera-out", s(&ref_cam)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let db = dir.path().join("db.json");
    let o = run(&["build-db", "--ref-obs", s(&ref_obs), "--ref-cam", s(&ref_cam), "--out", s(&db)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let obs = simulate(
        dir.path(),
        "cal",
        r#"{"image_count": 1, "pixel_noise_sigma": 0.3, "rng_seed": 4, "require_full_visibility": true}"#,
    );
    let out = dir.path().join("report.json");
    let o = run(&["calibrate", "--in", s(&obs), "--mode", "single", "--reference", s(&db), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r.solver, "single_image+ba");
    assert!((r.intrinsics.fx / 1000.0 - 1.0).abs() < 0.01, "{:?}", r.intrinsics);
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\n  \"radius\": 700.0,\n  \"image_count\": -3\n}\n");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("x.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_arguments_exit_with_input_error() {
    let o = run(&["calibrate", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn benchmark_writes_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bench.json",
        r#"{"trial_count": 4, "image_count": 6, "sweeps": {"noise": [0.5, 1.0]}}"#,
    );
    let csv = dir.path().join("out.csv");
    let o = run(&["benchmark", "--config", s(&cfg), "--sweep", "noise", "--out", s(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_value,solver,stage,fx_err_rel_mean,fx_err_rel_std,cxy_err_px_mean,cxy_err_px_std,\
         d1_err_mean,d2_err_mean,tcp_err_mm_mean,fail_count,ms_per_trial"
    );
    assert_eq!(lines.count(), 8);
}
