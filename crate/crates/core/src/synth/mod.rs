//! Synthetic scenes under spherical motion, the plane-based baseline and the
//! Monte Carlo benchmark harness.

mod config;
mod invariance;
mod monte_carlo;
mod scene;
mod zhang;

pub use config::{GridSpec, SolverSelection, SweepValues, SyntheticConfig};
pub use invariance::{
    orthogonal_triplet, orthogonality_residuals, pair_angle_spread, search_orthogonal_offsets,
    sphere_deviation, OrthogonalitySearch, ROOT_TOLERANCE,
};
pub use monte_carlo::{
    ground_truth, run_monte_carlo, run_monte_carlo_with, run_point, run_trial, threads_from_env,
    write_csv, Estimate, MonteCarloReport, SolverKind, Stage, Sweep, TrialErrors, TrialRun,
    TrialStats, CSV_COLUMNS, PARAMETER_NAMES, THREADS_ENV,
};
pub use scene::{
    generate_scene, generate_single_image_scene, generate_spherical_poses, render_image,
    render_observations, sample_center, sample_rotation, visible_count, SceneSeed,
    SingleImageScene, StreamKind, SyntheticScene,
};
pub use zhang::{planar_poses, zhang_from_homographies, zhang_init};
