use nalgebra::{Matrix3, Vector3};

use crate::geom::Rotation;
use crate::{Error, Result};

/// Least-squares rotation `R` with `R * database_i ~ calibration_i`.
///
/// Uses the centred cross-covariance `A = sum (db_i - db_mean)(cal_i - cal_mean)^T`
/// with SVD `A = U S V^T`; the minimizer is `R = V diag(1, 1, d) U^T` with
/// `d = sign det(V U^T)` guarding against reflections.
pub fn estimate_rotation_kabsch(
    calibration: &[Vector3<f64>],
    database: &[Vector3<f64>],
) -> Result<Rotation> {
    if calibration.len() != database.len() {
        return Err(Error::InvalidInput(format!(
            "{} calibration rays but {} database rays",
            calibration.len(),
            database.len()
        )));
    }
    if calibration.len() < 3 {
        return Err(Error::Precondition(
            "rotation estimation needs at least 3 ray pairs".into(),
        ));
    }
    let n = calibration.len() as f64;
    let mc = calibration.iter().sum::<Vector3<f64>>() / n;
    let md = database.iter().sum::<Vector3<f64>>() / n;
    let a = calibration
        .iter()
        .zip(database)
        .fold(Matrix3::zeros(), |acc, (c, d)| {
            acc + (d - md) * (c - mc).transpose()
        });
    let svd = a.svd(true, true);
    let sv = svd.singular_values;
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|x, y| y.total_cmp(x));
    if !(sorted[0] > 0.0) || sorted[1] <= 1e-10 * sorted[0] {
        return Err(Error::DegenerateConfiguration(
            "ray covariance has rank below 2".into(),
        ));
    }
    let u = svd.u.expect("requested");
    let v = svd.v_t.expect("requested").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    Ok(Rotation::nearest(&r))
}
