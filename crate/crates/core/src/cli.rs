//! Command implementations behind the `collimcal` binary.
//!
//! Every command returns a [`crate::Error`]; [`exit_code`] maps it onto the
//! process exit status: 0 success, 2 input or validation, 3 solver or
//! numeric failure, 4 degenerate configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::geom::Distortion;
use crate::io::{
    field_line, load_camera, load_database, load_observations, parse_json, save_database,
    write_json, CalibrationReport, CameraFile, ConfigEcho, GroundTruth, ObservationFile,
    ReportExtrinsics, TruthComparison,
};
use crate::multi::{detect_degeneracy, solve_closed_form, solve_minimal_detailed};
use crate::refine::{evaluate_spherical, spherical_ba, RefinementConfig};
use crate::single::{build_ray_database, calibrate_single_image, RayDatabase, SingleImageConfig};
use crate::synth::{
    generate_scene, run_monte_carlo, write_csv, MonteCarloReport, SceneSeed, Sweep,
    SyntheticConfig,
};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::InvalidInput(_) | Error::Precondition(_) | Error::Io(_) | Error::Format(_) => {
            EXIT_INPUT
        }
        Error::RankDeficient { .. } | Error::DegenerateConfiguration(_) | Error::SingularHomography => {
            EXIT_DEGENERATE
        }
        _ => EXIT_SOLVER,
    }
}

/// Reads and validates a synthetic configuration. Errors name the file, the
/// line and the offending field.
pub fn load_config(path: &Path) -> Result<SyntheticConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let config: SyntheticConfig = parse_json(&text, &path.display().to_string())?;
    config.validate().map_err(|e| {
        let line = SyntheticConfig::field_of(&e)
            .and_then(|f| field_line(&text, &f))
            .map(|l| format!(" line {l}"))
            .unwrap_or_default();
        let detail = match &e {
            Error::InvalidInput(m) => m.clone(),
            other => other.to_string(),
        };
        Error::InvalidInput(format!("{}{line}: {detail}", path.display()))
    })?;
    Ok(config)
}

/// Writes a simulated observation file with its ground truth, and optionally
/// a camera file holding the generating intrinsics.
pub fn cmd_simulate(config: &Path, out: &Path, camera_out: Option<&Path>) -> Result<()> {
    let config = load_config(config)?;
    let scene = generate_scene(&config, SceneSeed::new(config.rng_seed, 0))?;
    let truth = GroundTruth {
        intrinsics: scene.intrinsics,
        distortion: scene.distortion,
        center: scene.center,
        rotations: scene.rotations.clone(),
    };
    let file = ObservationFile::new(&scene.observations, Some(config.image_size), Some(truth));
    write_json(out, &file)?;
    if let Some(path) = camera_out {
        write_json(
            path,
            &CameraFile::new(scene.intrinsics, scene.distortion, Some(config.image_size)),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Closed-form solver on three or more images.
    Nimg,
    /// Two-image minimal solver.
    Minimal,
    /// One image against a ray database.
    Single,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nimg" => Ok(Mode::Nimg),
            "minimal" => Ok(Mode::Minimal),
            "single" => Ok(Mode::Single),
            other => Err(Error::InvalidInput(format!(
                "unknown mode '{other}' (expected nimg, minimal or single)"
            ))),
        }
    }
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Nimg => "nimg",
            Mode::Minimal => "minimal",
            Mode::Single => "single",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrateArgs {
    pub input: PathBuf,
    pub mode: Mode,
    pub reference: Option<PathBuf>,
    pub refine: bool,
    pub out: PathBuf,
}

/// Calibrates from an observation file and writes the report.
pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<CalibrationReport> {
    let (file, obs) = load_observations(&args.input)?;
    let refinement = RefinementConfig::default();
    let n = obs.len();
    let arity_ok = match args.mode {
        Mode::Nimg => n >= 3,
        Mode::Minimal => n == 2,
        Mode::Single => n == 1,
    };
    if !arity_ok {
        let need = match args.mode {
            Mode::Nimg => "at least 3 images",
            Mode::Minimal => "exactly 2 images",
            Mode::Single => "exactly 1 image",
        };
        return Err(Error::InvalidInput(format!(
            "mode {} needs {need}, input has {n}",
            args.mode.name()
        )));
    }
    let zero = Distortion::zero();

    let (solver, k, d, extrinsics, report, degeneracy, center) = match args.mode {
        Mode::Nimg | Mode::Minimal => {
            let deg = detect_degeneracy(&obs)?;
            let (solver, k, ext) = if args.mode == Mode::Nimg {
                if deg.spherical_rank < 11 {
                    return Err(Error::DegenerateConfiguration(format!(
                        "constraint rank {} < 11 (repeated views {:?}, normal rotations {:?})",
                        deg.spherical_rank, deg.pure_translation_pairs, deg.z_rotation_pairs
                    )));
                }
                let (k, ext) = solve_closed_form(&obs)?;
                ("closed_form", k, ext)
            } else {
                if deg.is_flagged() {
                    return Err(Error::DegenerateConfiguration(format!(
                        "image pair is degenerate (repeated views {:?}, normal rotations {:?})",
                        deg.pure_translation_pairs, deg.z_rotation_pairs
                    )));
                }
                let rep = solve_minimal_detailed(&obs)?;
                let best = rep
                    .candidates
                    .into_iter()
                    .next()
                    .ok_or(Error::NoPositiveDefiniteCandidate)?;
                ("minimal", best.intrinsics, best.extrinsics)
            };
            let (solver, k, d, ext, report) = if args.refine {
                let cal = spherical_ba(&obs, (&k, &zero, &ext), &refinement)?;
                let name = if solver == "minimal" { "minimal+ba" } else { "closed_form+ba" };
                (name, cal.intrinsics, cal.distortion, cal.extrinsics, cal.report)
            } else {
                let report = evaluate_spherical(&obs, &k, &zero, &ext)?;
                (solver, k, zero, ext, report)
            };
            let center = ext.center();
            let extrinsics = ReportExtrinsics::Spherical {
                center,
                rotations: ext.rotations,
            };
            (solver, k, d, extrinsics, report, Some(deg), Some(center))
        }
        Mode::Single => {
            let reference = args.reference.as_ref().ok_or_else(|| {
                Error::InvalidInput("mode single needs --reference <database>".into())
            })?;
            let db = load_database(reference)?;
            let image_size = file.image_size.ok_or_else(|| {
                Error::InvalidInput("mode single needs image_size in the observation file".into())
            })?;
            let config = SingleImageConfig {
                image_size,
                refine: refinement,
                skip_ba: !args.refine,
                ..Default::default()
            };
            let r = calibrate_single_image(&obs.images()[0].points, &db, &config)?;
            let solver = if args.refine { "single_image+ba" } else { "single_image" };
            (
                solver,
                r.intrinsics,
                r.distortion,
                ReportExtrinsics::Relative { rotation: r.rotation },
                r.report,
                None,
                None,
            )
        }
    };

    let error_vs_truth = file
        .ground_truth
        .as_ref()
        .map(|gt| TruthComparison::new(&k, &d, center, gt));
    let report = CalibrationReport {
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        solver: solver.into(),
        intrinsics: k,
        distortion: d,
        extrinsics,
        rms_reprojection: report.rms_reprojection,
        per_image_rms: report.per_image_rms,
        iterations_used: report.iterations_used,
        converged: report.converged,
        degeneracy,
        error_vs_truth,
        config: ConfigEcho {
            input: args.input.display().to_string(),
            mode: args.mode.name().into(),
            refine: args.refine,
            reference: args.reference.as_ref().map(|p| p.display().to_string()),
            refinement,
        },
    };
    write_json(&args.out, &report)?;
    Ok(report)
}

/// Builds a ray database from a single-image reference file and the
/// reference camera's known parameters.
pub fn cmd_build_db(ref_obs: &Path, ref_cam: &Path, out: &Path) -> Result<RayDatabase> {
    let (_, obs) = load_observations(ref_obs)?;
    if obs.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "reference file must hold exactly 1 image, found {}",
            obs.len()
        )));
    }
    let cam = load_camera(ref_cam)?;
    let db = build_ray_database(&obs.images()[0].points, &cam.intrinsics, &cam.distortion)?;
    save_database(out, &db)?;
    Ok(db)
}

/// Runs a Monte Carlo sweep and writes the CSV. The timing column is filled
/// only when `timing` is set.
pub fn cmd_benchmark(config: &Path, sweep: Sweep, out: &Path, timing: bool) -> Result<MonteCarloReport> {
    let config = load_config(config)?;
    let report = run_monte_carlo(&config, sweep, &config.solvers)?;
    let file = std::fs::File::create(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    write_csv(&report, timing, std::io::BufWriter::new(file))?;
    Ok(report)
}
