//! Damped Gauss-Newton (Levenberg-Marquardt) with Cauchy robustification.
//!
//! Residuals come in fixed-size blocks (one per observation). Each block gets
//! the weight `rho'(|r_b|^2)` with `rho(s) = c^2 ln(1 + s / c^2)`, and the
//! reweighted normal equations are accumulated block by block, so the gradient
//! is exact and sparse problems stay cheap.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_DAMPING: f64 = 1e32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub parameter_tolerance: f64,
    /// Cauchy scale in residual units (pixels for reprojection problems).
    /// `f64::INFINITY` gives plain least squares.
    pub cauchy_scale: f64,
    pub initial_damping: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-10,
            parameter_tolerance: 1e-12,
            cauchy_scale: 2.0,
            initial_damping: 1e-3,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.parameter_tolerance > 0.0
            && self.cauchy_scale > 0.0
            && self.initial_damping > 0.0
            && self.initial_damping.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "refinement settings must all be positive".into(),
            ))
        }
    }
}

/// Cauchy loss and its derivative with respect to the squared norm.
#[derive(Debug, Clone, Copy)]
pub struct CauchyLoss {
    c2: f64,
}

impl CauchyLoss {
    pub fn new(scale: f64) -> Self {
        Self { c2: scale * scale }
    }

    pub fn rho(&self, s: f64) -> f64 {
        if self.c2.is_infinite() {
            s
        } else {
            self.c2 * (s / self.c2).ln_1p()
        }
    }

    pub fn weight(&self, s: f64) -> f64 {
        if self.c2.is_infinite() {
            1.0
        } else {
            1.0 / (1.0 + s / self.c2)
        }
    }
}

/// Jacobian of one residual block with respect to the listed parameters.
#[derive(Debug, Clone)]
pub struct JacobianBlock {
    pub cols: Vec<usize>,
    /// `block_size x cols.len()`.
    pub values: DMatrix<f64>,
}

pub trait LeastSquaresProblem {
    type State: Clone;

    /// Length of the tangent-space increment.
    fn num_params(&self) -> usize;

    /// Residual entries per robust block.
    fn block_size(&self) -> usize;

    fn residuals(&self, state: &Self::State) -> Result<DVector<f64>>;

    /// One block per residual block, in residual order.
    fn jacobian(&self, state: &Self::State) -> Result<Vec<JacobianBlock>>;

    /// Applies a tangent-space increment.
    fn retract(&self, state: &Self::State, delta: &DVector<f64>) -> Self::State;

    /// Parameters held at their initial value.
    fn fixed(&self) -> Vec<bool> {
        vec![false; self.num_params()]
    }

    fn dense_jacobian(&self, state: &Self::State) -> Result<DMatrix<f64>> {
        let blocks = self.jacobian(state)?;
        let b = self.block_size();
        let mut j = DMatrix::zeros(blocks.len() * b, self.num_params());
        for (k, blk) in blocks.iter().enumerate() {
            for (c, &col) in blk.cols.iter().enumerate() {
                for r in 0..b {
                    j[(k * b + r, col)] += blk.values[(r, c)];
                }
            }
        }
        Ok(j)
    }
}

/// Central-difference Jacobian through [`LeastSquaresProblem::retract`], with
/// step `h * max(1, |x_j|)` where `x_j` is the coordinate scale supplied.
pub fn finite_difference_jacobian<P: LeastSquaresProblem>(
    problem: &P,
    state: &P::State,
    scales: &[f64],
    h: f64,
) -> Result<DMatrix<f64>> {
    let n = problem.num_params();
    let m = problem.residuals(state)?.len();
    let mut j = DMatrix::zeros(m, n);
    for c in 0..n {
        let step = h * scales.get(c).copied().unwrap_or(1.0).abs().max(1.0);
        let mut d = DVector::zeros(n);
        d[c] = step;
        let plus = problem.residuals(&problem.retract(state, &d))?;
        d[c] = -step;
        let minus = problem.residuals(&problem.retract(state, &d))?;
        j.set_column(c, &((plus - minus) / (2.0 * step)));
    }
    Ok(j)
}

#[derive(Debug, Clone)]
pub struct LmOutcome<S> {
    pub state: S,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub converged: bool,
    /// Robust cost at the start and after every accepted step.
    pub cost_trajectory: Vec<f64>,
}

fn robust_cost(loss: &CauchyLoss, r: &DVector<f64>, block: usize) -> f64 {
    r.as_slice()
        .chunks(block)
        .map(|b| loss.rho(b.iter().map(|v| v * v).sum()))
        .sum::<f64>()
        / 2.0
}

/// Minimizes the robust cost of `problem` starting from `init`.
///
/// Running out of iterations is not an error: the best state so far is
/// returned with `converged = false`.
pub fn minimize<P: LeastSquaresProblem>(
    problem: &P,
    init: P::State,
    config: &RefinementConfig,
) -> Result<LmOutcome<P::State>> {
    config.validate()?;
    let n = problem.num_params();
    let bs = problem.block_size();
    let fixed = problem.fixed();
    let loss = CauchyLoss::new(config.cauchy_scale);

    let mut state = init;
    let mut r = problem.residuals(&state)?;
    let mut cost = robust_cost(&loss, &r, bs);
    let mut trajectory = vec![cost];
    let mut mu = config.initial_damping;
    let mut iterations = 0;
    let mut accepted = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        let blocks = problem.jacobian(&state)?;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut g = DVector::<f64>::zeros(n);
        for (k, blk) in blocks.iter().enumerate() {
            let rb = r.rows(k * bs, bs);
            let w = loss.weight(rb.norm_squared());
            let jt_r = blk.values.tr_mul(&rb);
            let jt_j = blk.values.tr_mul(&blk.values);
            for (p, &cp) in blk.cols.iter().enumerate() {
                g[cp] += w * jt_r[p];
                for (q, &cq) in blk.cols.iter().enumerate() {
                    a[(cp, cq)] += w * jt_j[(p, q)];
                }
            }
        }
        for (j, &f) in fixed.iter().enumerate() {
            if f {
                a.row_mut(j).fill(0.0);
                a.column_mut(j).fill(0.0);
                a[(j, j)] = 1.0;
                g[j] = 0.0;
            } else if a[(j, j)] == 0.0 {
                return Err(Error::JacobianRankCollapse(j));
            }
        }
        if g.amax() < config.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let diag = a.diagonal();
        let mut improved = false;
        loop {
            let mut damped = a.clone();
            for j in 0..n {
                damped[(j, j)] += mu * diag[j];
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 10.0;
                if mu > MAX_DAMPING {
                    return Err(Error::NormalEquationsFailed);
                }
                continue;
            };
            let step = -chol.solve(&g);
            if step.norm() < config.parameter_tolerance {
                converged = true;
                break;
            }
            let candidate = problem.retract(&state, &step);
            let new_cost = match problem.residuals(&candidate) {
                Ok(r_new) => {
                    let c = robust_cost(&loss, &r_new, bs);
                    if c < cost {
                        r = r_new;
                        Some(c)
                    } else {
                        None
                    }
                }
                // A step into an invalid region (e.g. behind the camera) is a rejection.
                Err(_) => None,
            };
            match new_cost {
                Some(c) => {
                    state = candidate;
                    cost = c;
                    trajectory.push(c);
                    accepted += 1;
                    mu = (mu / 10.0).max(1e-15);
                    improved = true;
                    break;
                }
                None => {
                    mu *= 10.0;
                    if mu > MAX_DAMPING {
                        converged = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }

    Ok(LmOutcome {
        state,
        iterations,
        accepted_steps: accepted,
        converged,
        cost_trajectory: trajectory,
    })
}

struct ClosureProblem<R, J> {
    n: usize,
    residual: R,
    jacobian: J,
}

impl<R, J> LeastSquaresProblem for ClosureProblem<R, J>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    type State = DVector<f64>;

    fn num_params(&self) -> usize {
        self.n
    }

    fn block_size(&self) -> usize {
        1
    }

    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let r = (self.residual)(x);
        if r.iter().all(|v| v.is_finite()) {
            Ok(r)
        } else {
            Err(Error::NonConvergence("non-finite residual".into()))
        }
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<Vec<JacobianBlock>> {
        let j = (self.jacobian)(x);
        let cols: Vec<usize> = (0..self.n).collect();
        Ok((0..j.nrows())
            .map(|i| JacobianBlock {
                cols: cols.clone(),
                values: j.rows(i, 1).into_owned(),
            })
            .collect())
    }

    fn retract(&self, x: &DVector<f64>, delta: &DVector<f64>) -> DVector<f64> {
        x + delta
    }
}

/// Euclidean convenience wrapper: each residual entry is its own robust block.
pub fn lm_minimize<R, J>(
    residual: R,
    jacobian: J,
    x0: DVector<f64>,
    config: &RefinementConfig,
) -> Result<(DVector<f64>, super::ResidualReport)>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let problem = ClosureProblem {
        n: x0.len(),
        residual,
        jacobian,
    };
    let out = minimize(&problem, x0, config)?;
    let r = problem.residuals(&out.state)?;
    let rms = if r.is_empty() {
        0.0
    } else {
        (r.norm_squared() / r.len() as f64).sqrt()
    };
    let report = super::ResidualReport {
        rms_reprojection: rms,
        per_image_rms: vec![rms],
        iterations_used: out.iterations,
        converged: out.converged,
        cost_trajectory: out.cost_trajectory,
    };
    Ok((out.state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[allow(clippy::type_complexity)]
    fn rosenbrock() -> (
        impl Fn(&DVector<f64>) -> DVector<f64>,
        impl Fn(&DVector<f64>) -> DMatrix<f64>,
    ) {
        (
            |x: &DVector<f64>| dvector![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]],
            |x: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0]),
        )
    }

    #[test]
    fn rosenbrock_converges_to_minimum() {
        let (r, j) = rosenbrock();
        let cfg = RefinementConfig {
            cauchy_scale: f64::INFINITY,
            ..Default::default()
        };
        let (x, report) = lm_minimize(r, j, dvector![-1.2, 1.0], &cfg).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8, "{x}");
        assert!(report.converged);
        assert!(report.cost_trajectory.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rosenbrock_with_cauchy_loss() {
        let (r, j) = rosenbrock();
        let (x, _) = lm_minimize(r, j, dvector![-1.2, 1.0], &RefinementConfig::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_residual_start_takes_no_iterations() {
        let (r, j) = rosenbrock();
        let (x, report) = lm_minimize(r, j, dvector![1.0, 1.0], &RefinementConfig::default()).unwrap();
        assert_eq!(x, dvector![1.0, 1.0]);
        assert_eq!(report.iterations_used, 0);
        assert!(report.converged);
        assert_eq!(report.cost_trajectory, vec![0.0]);
    }

    #[test]
    fn iteration_budget_is_respected() {
        let (r, j) = rosenbrock();
        let cfg = RefinementConfig {
            max_iterations: 2,
            ..Default::default()
        };
        let (_, report) = lm_minimize(r, j, dvector![-1.2, 1.0], &cfg).unwrap();
        assert_eq!(report.iterations_used, 2);
        assert!(!report.converged);
    }

    #[test]
    fn dead_parameter_is_reported() {
        let r = |x: &DVector<f64>| dvector![x[0] - 1.0];
        let j = |_: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let err = lm_minimize(r, j, dvector![0.0, 0.0], &RefinementConfig::default()).unwrap_err();
        assert_eq!(err, Error::JacobianRankCollapse(1));
    }

    #[test]
    fn cauchy_weight_matches_derivative() {
        let loss = CauchyLoss::new(2.0);
        let s = 3.7;
        let h = 1e-6;
        let numeric = (loss.rho(s + h) - loss.rho(s - h)) / (2.0 * h);
        assert!((numeric - loss.weight(s)).abs() < 1e-9);
        assert_eq!(CauchyLoss::new(f64::INFINITY).rho(5.0), 5.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = RefinementConfig {
            cauchy_scale: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
