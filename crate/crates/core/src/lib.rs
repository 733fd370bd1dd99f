//! Camera calibration from collimator imagery.
//!
//! A collimator presents its reticle at infinity, so every image of it is
//! equivalent to the camera rotating about a fixed point at a fixed radius from
//! a planar target. This crate estimates intrinsics under that spherical motion
//! model and provides:
//!
//! - [`geom`]: pinhole camera with two-term radial distortion, rotations,
//!   homography estimation and decomposition.
//! - [`multi`]: the closed-form N-image solver, the two-image minimal solver,
//!   conic decomposition and degeneracy detection.
//! - [`refine`]: a Levenberg-Marquardt engine with Cauchy loss and the bundle
//!   adjustment problems built on it.
//! - [`single`]: calibration from a single image against a ray database.
//! - [`synth`]: synthetic scenes, a plane-based baseline and the Monte Carlo
//!   benchmark harness.
//! - [`io`] and [`cli`]: file formats and the command implementations behind
//!   the `collimcal` binary.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geom;
pub mod io;
pub mod multi;
pub mod refine;
pub mod single;
pub mod synth;

pub use error::{Error, Result};
pub use geom::{
    angular_distance, back_project, decompose_homography, estimate_homography, project,
    CameraIntrinsics, Distortion, Homography, ObservationSet, PlanarTarget, Rotation,
};
pub use multi::{
    decompose_iac, detect_degeneracy, solve_closed_form, solve_minimal, IacVector,
    SphericalExtrinsics,
};
pub use refine::{lm_minimize, single_image_ba, spherical_ba, RefinementConfig, ResidualReport};
pub use single::{calibrate_single_image, RayDatabase, SingleImageResult};
pub use synth::{run_monte_carlo, SyntheticConfig};
