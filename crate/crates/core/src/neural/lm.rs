use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::{all_finite, Scalar};

/// A residual vector `r(θ)` together with its Jacobian `∂r/∂θ`.
pub trait LeastSquares<S: Scalar> {
    fn residuals(&mut self, theta: &[S]) -> Result<Vec<S>>;

    /// Jacobian with one row per residual and one column per parameter.
    fn jacobian(&mut self, theta: &[S]) -> Result<Matrix<S>>;

    /// Residuals and Jacobian at once. Override when both come out of a single
    /// pass (recurrent models); the default calls the two methods separately.
    fn residuals_and_jacobian(&mut self, theta: &[S]) -> Result<(Vec<S>, Matrix<S>)> {
        Ok((self.residuals(theta)?, self.jacobian(theta)?))
    }
}

/// Adapter turning a pair of closures into a [`LeastSquares`] problem.
pub struct FnProblem<R, J> {
    pub residuals: R,
    pub jacobian: J,
}

impl<S, R, J> LeastSquares<S> for FnProblem<R, J>
where
    S: Scalar,
    R: FnMut(&[S]) -> Result<Vec<S>>,
    J: FnMut(&[S]) -> Result<Matrix<S>>,
{
    fn residuals(&mut self, theta: &[S]) -> Result<Vec<S>> {
        (self.residuals)(theta)
    }

    fn jacobian(&mut self, theta: &[S]) -> Result<Matrix<S>> {
        (self.jacobian)(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the SSE by less than this fraction.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            initial_damping: 1e-2,
            damping_increase: 10.0,
            damping_decrease: 0.1,
            max_iterations: 500,
            tolerance: 1e-9,
            seed: 1,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("LM config: {what}")));
        if !(self.initial_damping > 0.0 && self.initial_damping.is_finite()) {
            return bad("initial damping must be positive");
        }
        if !(self.damping_increase > 1.0) {
            return bad("damping increase factor must exceed 1");
        }
        if !(self.damping_decrease > 0.0 && self.damping_decrease < 1.0) {
            return bad("damping decrease factor must lie in (0, 1)");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmStep {
    pub iteration: usize,
    pub sse: f64,
    pub damping: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct LmOutcome<S> {
    pub theta: Vec<S>,
    pub sse: S,
    pub history: Vec<LmStep>,
    pub converged: bool,
}

impl<S> LmOutcome<S> {
    /// SSE after every accepted step, starting with the initial point.
    pub fn accepted_sse(&self) -> Vec<f64> {
        self.history
            .iter()
            .filter(|s| s.accepted)
            .map(|s| s.sse)
            .collect()
    }
}

const MAX_DAMPING: f64 = 1e16;
const MIN_DAMPING: f64 = 1e-15;

/// Batch Levenberg-Marquardt on `½‖r(θ)‖²`.
///
/// Each trial solves `(JᵀJ + λI) Δθ = −Jᵀr`; a trial that lowers the SSE is
/// accepted and shrinks `λ`, otherwise `λ` grows and the step is retried from
/// the same point. Every trial counts as one iteration.
pub fn lm_train<S: Scalar, P: LeastSquares<S> + ?Sized>(
    problem: &mut P,
    theta0: &[S],
    cfg: &LmConfig,
) -> Result<LmOutcome<S>> {
    cfg.validate()?;
    let mut theta = theta0.to_vec();
    let (mut r, mut jac) = problem.residuals_and_jacobian(&theta)?;
    if !all_finite(&r) {
        return Err(Error::NonFinite(
            "residuals at the initial parameters".into(),
        ));
    }
    if jac.rows() != r.len() || jac.cols() != theta.len() {
        return Err(Error::shape(format!(
            "Jacobian is {}x{}, expected {}x{}",
            jac.rows(),
            jac.cols(),
            r.len(),
            theta.len()
        )));
    }
    let mut sse = dot(&r, &r);
    let mut damping = cfg.initial_damping;
    let mut history = vec![LmStep {
        iteration: 0,
        sse: sse.as_f64(),
        damping,
        accepted: true,
    }];
    let mut converged = sse == S::zero();
    let mut normal = jac.gram();
    let mut grad = jac.t_mul_vec(&r);

    let mut iteration = 0;
    while !converged && iteration < cfg.max_iterations {
        iteration += 1;
        if grad.iter().all(|g| *g == S::zero()) {
            converged = true;
            break;
        }
        let mut augmented = normal.clone();
        for i in 0..augmented.rows() {
            augmented[(i, i)] += S::of(damping);
        }
        let rhs: Vec<S> = grad.iter().map(|g| -*g).collect();
        let step = augmented.cholesky_solve(&rhs).map_err(|_| {
            Error::Numerical(format!(
                "augmented normal equations singular at damping {damping:e}"
            ))
        })?;
        let trial: Vec<S> = theta.iter().zip(&step).map(|(t, d)| *t + *d).collect();
        let trial_r = match problem.residuals(&trial) {
            Ok(v) if all_finite(&v) => Some(v),
            Ok(_) | Err(Error::NonFinite(_)) | Err(Error::Simulation { .. }) => None,
            Err(e) => return Err(e),
        };
        let trial_sse = trial_r.as_ref().map(|v| dot(v, v));
        match (trial_r, trial_sse) {
            (Some(tr), Some(ts)) if ts.is_finite() && ts < sse => {
                let rel = ((sse - ts) / sse).as_f64();
                theta = trial;
                r = tr;
                sse = ts;
                damping = (damping * cfg.damping_decrease).max(MIN_DAMPING);
                history.push(LmStep {
                    iteration,
                    sse: sse.as_f64(),
                    damping,
                    accepted: true,
                });
                if rel < cfg.tolerance || sse == S::zero() {
                    converged = true;
                    break;
                }
                let (_, j) = problem.residuals_and_jacobian(&theta)?;
                jac = j;
                normal = jac.gram();
                grad = jac.t_mul_vec(&r);
            }
            _ => {
                damping *= cfg.damping_increase;
                history.push(LmStep {
                    iteration,
                    sse: trial_sse.map_or(f64::INFINITY, |s| s.as_f64()),
                    damping,
                    accepted: false,
                });
                if damping > MAX_DAMPING {
                    // no descent direction left at machine precision
                    converged = true;
                    break;
                }
            }
        }
    }

    Ok(LmOutcome {
        theta,
        sse,
        history,
        converged,
    })
}
