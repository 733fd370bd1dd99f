use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_scene, planar_poses, zhang_init, SceneSeed, SolverSelection, SyntheticConfig};
use crate::geom::{CameraIntrinsics, Distortion, ObservationSet};
use crate::multi::solve_closed_form;
use crate::refine::{general_ba, spherical_ba, BaOptions, RefinementConfig, ResidualReport};
use crate::{Error, Result};

/// Environment variable capping benchmark worker threads.
pub const THREADS_ENV: &str = "COLLIMCAL_THREADS";

/// Order of the per-parameter error arrays.
pub const PARAMETER_NAMES: [&str; 10] = ["fx", "fy", "cx", "cy", "gamma", "d1", "d2", "x", "y", "r"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Pixel noise sigma.
    Noise,
    /// Number of images.
    Images,
    /// Optical-centre perturbation sigma.
    Spherical,
}

impl Sweep {
    pub fn values(&self, config: &SyntheticConfig) -> Vec<f64> {
        match self {
            Sweep::Noise => config.sweeps.noise.clone(),
            Sweep::Images => config.sweeps.images.iter().map(|&n| n as f64).collect(),
            Sweep::Spherical => config.sweeps.spherical.clone(),
        }
    }

    /// `config` with the swept quantity set to `value`.
    pub fn apply(&self, config: &SyntheticConfig, value: f64) -> SyntheticConfig {
        let mut c = config.clone();
        match self {
            Sweep::Noise => c.pixel_noise_sigma = value,
            Sweep::Images => c.image_count = value as usize,
            Sweep::Spherical => c.spherical_noise_sigma = value,
        }
        c
    }
}

impl FromStr for Sweep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(Sweep::Noise),
            "images" => Ok(Sweep::Images),
            "spherical" => Ok(Sweep::Spherical),
            other => Err(Error::InvalidInput(format!(
                "unknown sweep '{other}' (expected noise, images or spherical)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Closed-form spherical solver, refined by spherical bundle adjustment.
    Ours,
    /// Plane-based baseline, refined by free-pose bundle adjustment.
    Zhang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Init,
    Refined,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Ours => "ours",
            SolverKind::Zhang => "zhang",
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Init => "init",
            Stage::Refined => "refined",
        })
    }
}

impl SolverSelection {
    /// Solver stages run per trial, in output order.
    pub fn runs(&self) -> Vec<(SolverKind, Stage)> {
        let mut out = Vec::new();
        for (on, kind) in [(self.ours, SolverKind::Ours), (self.zhang, SolverKind::Zhang)] {
            if on {
                out.push((kind, Stage::Init));
                if self.refine {
                    out.push((kind, Stage::Refined));
                }
            }
        }
        out
    }
}

/// Parameters returned by one solver stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub intrinsics: CameraIntrinsics,
    pub distortion: Distortion,
    /// Optical centre, for solvers that estimate one.
    pub center: Option<Vector3<f64>>,
    /// Refinement report, for refined stages.
    pub report: Option<ResidualReport>,
}

impl Estimate {
    /// Values in [`PARAMETER_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 10] {
        let k = &self.intrinsics;
        let d = &self.distortion;
        let c = self.center;
        [
            Some(k.fx),
            Some(k.fy),
            Some(k.cx),
            Some(k.cy),
            Some(k.gamma),
            Some(d.d1),
            Some(d.d2),
            c.map(|c| c.x),
            c.map(|c| c.y),
            c.map(|c| -c.z),
        ]
    }
}

/// Errors of one estimate against the generating parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialErrors {
    pub abs: [Option<f64>; 10],
    /// Absolute error over the true magnitude; equal to `abs` when the true
    /// value is zero.
    pub rel: [Option<f64>; 10],
    /// Relative focal error `|fx - fx_true| / fx_true`, as a fraction.
    pub fx_rel: f64,
    /// Principal point distance, pixels.
    pub cxy_px: f64,
    pub d1_abs: f64,
    pub d2_abs: f64,
    /// Optical centre distance to the nominal centre, millimetres.
    pub tcp_mm: Option<f64>,
}

impl TrialErrors {
    pub fn new(est: &Estimate, truth: &Estimate) -> Self {
        let e = est.values();
        let t = truth.values();
        let mut abs = [None; 10];
        let mut rel = [None; 10];
        for i in 0..10 {
            if let (Some(a), Some(b)) = (e[i], t[i]) {
                let err = (a - b).abs();
                abs[i] = Some(err);
                rel[i] = Some(if b != 0.0 { err / b.abs() } else { err });
            }
        }
        let k = &est.intrinsics;
        let kt = &truth.intrinsics;
        Self {
            abs,
            rel,
            fx_rel: (k.fx - kt.fx).abs() / kt.fx,
            cxy_px: ((k.cx - kt.cx).powi(2) + (k.cy - kt.cy).powi(2)).sqrt(),
            d1_abs: (est.distortion.d1 - truth.distortion.d1).abs(),
            d2_abs: (est.distortion.d2 - truth.distortion.d2).abs(),
            tcp_mm: match (est.center, truth.center) {
                (Some(a), Some(b)) => Some((a - b).norm()),
                _ => None,
            },
        }
    }
}

/// Result of one solver stage in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRun {
    pub estimate: Option<Estimate>,
    pub errors: Option<TrialErrors>,
    /// Error kind when the stage failed.
    pub failure: Option<String>,
}

/// Aggregated errors of one solver stage at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub sweep_value: f64,
    pub solver: SolverKind,
    pub stage: Stage,
    pub trial_count: usize,
    pub fail_count: usize,
    /// Mean absolute error per parameter, [`PARAMETER_NAMES`] order.
    pub mean_abs_error: [Option<f64>; 10],
    /// Mean relative error per parameter, [`PARAMETER_NAMES`] order.
    pub mean_rel_error: [Option<f64>; 10],
    pub fx_err_rel_mean: f64,
    pub fx_err_rel_std: f64,
    pub cxy_err_px_mean: f64,
    pub cxy_err_px_std: f64,
    pub d1_err_mean: f64,
    pub d2_err_mean: f64,
    pub tcp_err_mm_mean: Option<f64>,
    /// Per-trial results in trial order.
    pub trials: Vec<TrialRun>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

impl TrialStats {
    pub fn from_runs(sweep_value: f64, solver: SolverKind, stage: Stage, trials: Vec<TrialRun>) -> Self {
        let ok: Vec<&TrialErrors> = trials.iter().filter_map(|t| t.errors.as_ref()).collect();
        let column = |f: &dyn Fn(&TrialErrors) -> Option<f64>| -> Option<f64> {
            let v: Vec<f64> = ok.iter().filter_map(|e| f(e)).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let mean_abs_error = std::array::from_fn(|i| column(&|e| e.abs[i]));
        let mean_rel_error = std::array::from_fn(|i| column(&|e| e.rel[i]));
        let (fx_m, fx_s) = mean_std(&ok.iter().map(|e| e.fx_rel).collect::<Vec<_>>());
        let (c_m, c_s) = mean_std(&ok.iter().map(|e| e.cxy_px).collect::<Vec<_>>());
        Self {
            sweep_value,
            solver,
            stage,
            trial_count: trials.len(),
            fail_count: trials.len() - ok.len(),
            mean_abs_error,
            mean_rel_error,
            fx_err_rel_mean: fx_m,
            fx_err_rel_std: fx_s,
            cxy_err_px_mean: c_m,
            cxy_err_px_std: c_s,
            d1_err_mean: mean_std(&ok.iter().map(|e| e.d1_abs).collect::<Vec<_>>()).0,
            d2_err_mean: mean_std(&ok.iter().map(|e| e.d2_abs).collect::<Vec<_>>()).0,
            tcp_err_mm_mean: column(&|e| e.tcp_mm),
            trials,
        }
    }
}

/// Everything a sweep produces. Timing is kept apart from the statistics,
/// which are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub sweep: Sweep,
    pub stats: Vec<TrialStats>,
    /// Mean wall-clock milliseconds per trial, one entry per sweep point.
    pub ms_per_trial: Vec<f64>,
}

/// Generating parameters of a scene, in [`Estimate`] form.
pub fn ground_truth(config: &SyntheticConfig) -> Estimate {
    Estimate {
        intrinsics: config.intrinsics,
        distortion: config.distortion,
        center: Some(config.center()),
        report: None,
    }
}

fn run_solvers(
    obs: &ObservationSet,
    runs: &[(SolverKind, Stage)],
    refine: &RefinementConfig,
) -> Vec<Result<Estimate>> {
    let zero = Distortion::zero();
    let mut ours_init = None;
    let mut zhang_k = None;
    let mut out = Vec::with_capacity(runs.len());
    for &(solver, stage) in runs {
        let result = match (solver, stage) {
            (SolverKind::Ours, Stage::Init) => {
                let r = solve_closed_form(obs);
                ours_init = Some(r.clone());
                r.map(|(k, ext)| Estimate {
                    intrinsics: k,
                    distortion: zero,
                    center: Some(ext.center()),
                    report: None,
                })
            }
            (SolverKind::Ours, Stage::Refined) => {
                let init = ours_init.clone().unwrap_or_else(|| solve_closed_form(obs));
                init.and_then(|(k, ext)| {
                    let cal = spherical_ba(obs, (&k, &zero, &ext), refine)?;
                    Ok(Estimate {
                        intrinsics: cal.intrinsics,
                        distortion: cal.distortion,
                        center: Some(cal.extrinsics.center()),
                        report: Some(cal.report),
                    })
                })
            }
            (SolverKind::Zhang, Stage::Init) => {
                let r = zhang_init(obs);
                zhang_k = Some(r.clone());
                r.map(|k| Estimate {
                    intrinsics: k,
                    distortion: zero,
                    center: None,
                    report: None,
                })
            }
            (SolverKind::Zhang, Stage::Refined) => {
                let init = zhang_k.clone().unwrap_or_else(|| zhang_init(obs));
                init.and_then(|k| {
                    let poses = planar_poses(obs, &k)?;
                    let (k, d, _, report) =
                        general_ba(obs, &k, &zero, poses, refine, &BaOptions::default())?;
                    Ok(Estimate {
                        intrinsics: k,
                        distortion: d,
                        center: None,
                        report: Some(report),
                    })
                })
            }
        };
        out.push(result);
    }
    out
}

/// Runs every selected solver stage on one trial's scene.
pub fn run_trial(
    config: &SyntheticConfig,
    solvers: &SolverSelection,
    trial: u64,
) -> Vec<(SolverKind, Stage, TrialRun)> {
    let runs = solvers.runs();
    let truth = ground_truth(config);
    let results = match generate_scene(config, SceneSeed::new(config.rng_seed, trial)) {
        Ok(scene) => run_solvers(&scene.observations, &runs, &config.refine),
        Err(e) => runs.iter().map(|_| Err(e.clone())).collect(),
    };
    runs.into_iter()
        .zip(results)
        .map(|((solver, stage), r)| {
            let run = match r {
                Ok(est) => TrialRun {
                    errors: Some(TrialErrors::new(&est, &truth)),
                    estimate: Some(est),
                    failure: None,
                },
                Err(e) => TrialRun {
                    estimate: None,
                    errors: None,
                    failure: Some(e.kind().to_string()),
                },
            };
            (solver, stage, run)
        })
        .collect()
}

/// Worker count from [`THREADS_ENV`], or `None` for the rayon default.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got '{s}'"))),
        },
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// Runs `config.trial_count` trials at the configured values and aggregates
/// each solver stage. Returns the stats and the mean milliseconds per trial.
pub fn run_point(
    config: &SyntheticConfig,
    solvers: &SolverSelection,
    sweep_value: f64,
    threads: Option<usize>,
) -> Result<(Vec<TrialStats>, f64)> {
    config.validate()?;
    let start = Instant::now();
    let trials: Vec<_> = pool(threads)?.install(|| {
        (0..config.trial_count as u64)
            .into_par_iter()
            .map(|t| run_trial(config, solvers, t))
            .collect()
    });
    let ms = start.elapsed().as_secs_f64() * 1e3 / config.trial_count as f64;
    let runs = solvers.runs();
    let mut columns: Vec<Vec<TrialRun>> = vec![Vec::with_capacity(trials.len()); runs.len()];
    for trial in trials {
        for (j, (_, _, run)) in trial.into_iter().enumerate() {
            columns[j].push(run);
        }
    }
    let stats = runs
        .into_iter()
        .zip(columns)
        .map(|((solver, stage), col)| TrialStats::from_runs(sweep_value, solver, stage, col))
        .collect();
    Ok((stats, ms))
}

/// Runs a full sweep. Per-trial failures are recorded; a sweep point fails
/// when more than half of its trials fail for any solver stage.
pub fn run_monte_carlo(
    config: &SyntheticConfig,
    sweep: Sweep,
    solvers: &SolverSelection,
) -> Result<MonteCarloReport> {
    run_monte_carlo_with(config, sweep, solvers, threads_from_env()?)
}

pub fn run_monte_carlo_with(
    config: &SyntheticConfig,
    sweep: Sweep,
    solvers: &SolverSelection,
    threads: Option<usize>,
) -> Result<MonteCarloReport> {
    config.validate()?;
    let mut stats = Vec::new();
    let mut timing = Vec::new();
    for value in sweep.values(config) {
        let point = sweep.apply(config, value);
        let (s, ms) = run_point(&point, solvers, value, threads)?;
        for st in &s {
            if 2 * st.fail_count > st.trial_count {
                return Err(Error::FailureBudgetExceeded {
                    sweep_value: value,
                    solver: format!("{}/{}", st.solver, st.stage),
                    failed: st.fail_count,
                    trials: st.trial_count,
                });
            }
        }
        stats.extend(s);
        timing.push(ms);
    }
    Ok(MonteCarloReport {
        sweep,
        stats,
        ms_per_trial: timing,
    })
}

/// CSV header of [`write_csv`].
pub const CSV_COLUMNS: [&str; 12] = [
    "sweep_value",
    "solver",
    "stage",
    "fx_err_rel_mean",
    "fx_err_rel_std",
    "cxy_err_px_mean",
    "cxy_err_px_std",
    "d1_err_mean",
    "d2_err_mean",
    "tcp_err_mm_mean",
    "fail_count",
    "ms_per_trial",
];

/// Writes one row per sweep point and solver stage. The timing column is
/// left empty unless `with_timing` is set, so that repeated runs produce
/// identical files.
pub fn write_csv<W: std::io::Write>(report: &MonteCarloReport, with_timing: bool, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(io)?;
    let per_point = report.stats.len() / report.ms_per_trial.len().max(1);
    for (i, s) in report.stats.iter().enumerate() {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let ms = if with_timing {
            report
                .ms_per_trial
                .get(i / per_point.max(1))
                .map(|m| format!("{m:.3}"))
                .unwrap_or_default()
        } else {
            String::new()
        };
        w.write_record([
            s.sweep_value.to_string(),
            s.solver.to_string(),
            s.stage.to_string(),
            s.fx_err_rel_mean.to_string(),
            s.fx_err_rel_std.to_string(),
            s.cxy_err_px_mean.to_string(),
            s.cxy_err_px_std.to_string(),
            s.d1_err_mean.to_string(),
            s.d2_err_mean.to_string(),
            opt(s.tcp_err_mm_mean),
            s.fail_count.to_string(),
            ms,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            trial_count: 4,
            image_count: 5,
            sweeps: super::super::SweepValues {
                noise: vec![0.0, 1.0],
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_trials_recover_ground_truth() {
        let c = SyntheticConfig {
            pixel_noise_sigma: 0.0,
            distortion: Distortion::zero(),
            ..small()
        };
        let sel = SolverSelection {
            refine: false,
            ..Default::default()
        };
        let (stats, _) = run_point(&c, &sel, 0.0, Some(1)).unwrap();
        for s in &stats {
            assert_eq!(s.fail_count, 0);
            assert!(s.fx_err_rel_mean < 1e-6, "{:?} {}", s.solver, s.fx_err_rel_mean);
        }
    }

    #[test]
    fn same_seed_gives_identical_stats_and_csv() {
        let c = small();
        let sel = SolverSelection::default();
        let a = run_monte_carlo_with(&c, Sweep::Noise, &sel, Some(1)).unwrap();
        let b = run_monte_carlo_with(&c, Sweep::Noise, &sel, Some(2)).unwrap();
        assert_eq!(a.stats, b.stats);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_csv(&a, false, &mut ca).unwrap();
        write_csv(&b, false, &mut cb).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 4);
        assert!(text.starts_with("sweep_value,solver,stage,"));
    }

    #[test]
    fn failure_budget_is_enforced() {
        let c = SyntheticConfig {
            max_resample_attempts: 1,
            min_visible_points: 88,
            radius: 100.0,
            ..small()
        };
        let err = run_monte_carlo_with(&c, Sweep::Noise, &SolverSelection::default(), Some(1)).unwrap_err();
        assert_eq!(err.kind(), "failure_budget_exceeded");
    }

    #[test]
    fn sweep_names_parse() {
        assert_eq!("images".parse::<Sweep>().unwrap(), Sweep::Images);
        assert!("focal".parse::<Sweep>().is_err());
    }

    #[test]
    fn relative_error_falls_back_to_absolute_at_zero() {
        let truth = Estimate {
            intrinsics: CameraIntrinsics::new(1000.0, 1000.0, 500.0, 400.0, 0.0).unwrap(),
            distortion: Distortion::zero(),
            center: None,
            report: None,
        };
        let mut est = truth.clone();
        est.intrinsics.fx = 1010.0;
        est.distortion.d1 = 0.02;
        let e = TrialErrors::new(&est, &truth);
        assert!((e.fx_rel - 0.01).abs() < 1e-12);
        assert_eq!(e.rel[5], Some(0.02));
        assert_eq!(e.tcp_mm, None);
    }
}
