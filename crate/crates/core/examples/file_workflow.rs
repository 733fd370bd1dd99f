//! The command workflow through the library: simulate, calibrate and report.

use collimcal::cli::{cmd_calibrate, cmd_simulate, CalibrateArgs, Mode};

fn main() -> collimcal::Result<()> {
    let dir = std::env::temp_dir().join(format!("collimcal-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| collimcal::Error::Io(e.to_string()))?;
    let config = dir.join("config.json");
    std::fs::write(&config, "{\"pixel_noise_sigma\": 0.3, \"image_count\": 10}\n")
        .map_err(|e| collimcal::Error::Io(e.to_string()))?;
    let obs = dir.join("obs.json");
    cmd_simulate(&config, &obs, None)?;

    let report = cmd_calibrate(&CalibrateArgs {
        input: obs,
        mode: Mode::Nimg,
        reference: None,
        refine: true,
        out: dir.join("report.json"),
    })?;
    println!("solver {}: RMS {:.3} px", report.solver, report.rms_reprojection);
    if let Some(truth) = &report.error_vs_truth {
        println!("largest relative intrinsic error vs truth: {:.2e}", truth.max_intrinsics_rel);
    }
    println!("files in {}", dir.display());
    Ok(())
}
