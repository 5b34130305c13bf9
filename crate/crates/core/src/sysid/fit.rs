use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::{lm_train, param_count, LeastSquares, LmConfig, LmStep, Mlp};
use crate::scalar::Scalar;
use crate::surrogate::{Channel, SignalLog};
use crate::sysid::regressor::{Affine, ChannelData, RegressorSpec};
use crate::sysid::submodel::SubModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub lm: LmConfig,
    /// Extra random initialisations tried after a diverged run.
    pub restarts: usize,
    /// Independent initialisations per fit; the lowest SSE wins.
    pub starts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lm: LmConfig::default(),
            restarts: 5,
            starts: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<S> {
    pub model: SubModel<S>,
    /// Sum of squared simulation errors in engineering units over the fitted samples.
    pub sse: f64,
    /// Number of fitted samples (log length minus the initial history).
    pub n: usize,
    pub history: Vec<LmStep>,
    pub restarts: usize,
}

impl<S> FitResult<S> {
    pub fn n_params(&self) -> usize
    where
        S: Scalar,
    {
        self.model.mlp().n_params()
    }
}

/// Output-error least-squares problem: residuals are normalised simulation
/// errors `(y(k) − ŷ(k)) / scale` for `k ≥ max_lag`.
struct OeProblem<'a, S: Scalar> {
    model: SubModel<S>,
    data: &'a ChannelData<S>,
    init: Vec<S>,
    target: Vec<S>,
}

impl<S: Scalar> OeProblem<'_, S> {
    fn load(&mut self, theta: &[S]) -> Result<()> {
        self.model.set_weights(theta)
    }

    fn eval(&mut self, theta: &[S], jac: bool) -> Result<(Vec<S>, Option<Matrix<S>>)> {
        self.load(theta)?;
        let k0 = self.model.max_lag();
        let (z, sens) = self.model.simulate_with_sensitivities(self.data, &self.init)?;
        let r: Vec<S> = z[k0..]
            .iter()
            .zip(&self.target[k0..])
            .map(|(zk, tk)| *tk - *zk)
            .collect();
        let j = jac.then(|| {
            let p = sens.cols();
            Matrix::from_fn(r.len(), p, |i, c| -sens[(i + k0, c)])
        });
        Ok((r, j))
    }
}

impl<S: Scalar> LeastSquares<S> for OeProblem<'_, S> {
    fn residuals(&mut self, theta: &[S]) -> Result<Vec<S>> {
        Ok(self.eval(theta, false)?.0)
    }

    fn jacobian(&mut self, theta: &[S]) -> Result<Matrix<S>> {
        Ok(self.eval(theta, true)?.1.expect("requested"))
    }

    fn residuals_and_jacobian(&mut self, theta: &[S]) -> Result<(Vec<S>, Matrix<S>)> {
        let (r, j) = self.eval(theta, true)?;
        Ok((r, j.expect("requested")))
    }
}

/// Normalisation from the log statistics for the output and each input.
pub fn normalisation_from_log<S: Scalar>(
    log: &SignalLog,
    spec: &RegressorSpec,
    output: Channel,
) -> (Affine<S>, Vec<Affine<S>>) {
    (
        Affine::fit(&log.channel(output)),
        spec.inputs
            .iter()
            .map(|i| Affine::fit(&log.channel(i.channel)))
            .collect(),
    )
}

/// Trains one output-error sub-model on a log by batch Levenberg-Marquardt.
///
/// Inputs are the measured exogenous channels; the first `max_lag()` measured
/// outputs seed the simulation.
pub fn fit_oe_model<S: Scalar>(
    log: &SignalLog,
    output: Channel,
    spec: &RegressorSpec,
    n_hidden: usize,
    cfg: &FitConfig,
) -> Result<FitResult<S>> {
    let (out_norm, in_norms) = normalisation_from_log::<S>(log, spec, output);
    let data = ChannelData::<S>::from_log(log);
    let target: Vec<S> = log.channel(output).into_iter().map(S::of).collect();
    fit_oe_on(&data, &target, output, spec, n_hidden, out_norm, in_norms, cfg)
}

/// As [`fit_oe_model`], on raw channel data with explicit normalisation.
#[allow(clippy::too_many_arguments)]
pub fn fit_oe_on<S: Scalar>(
    data: &ChannelData<S>,
    target: &[S],
    output: Channel,
    spec: &RegressorSpec,
    n_hidden: usize,
    output_norm: Affine<S>,
    input_norms: Vec<Affine<S>>,
    cfg: &FitConfig,
) -> Result<FitResult<S>> {
    spec.validate(output)?;
    cfg.lm.validate()?;
    if n_hidden == 0 {
        return Err(Error::InvalidArgument("hidden layer needs at least one node".into()));
    }
    let k0 = spec.max_lag();
    let n_in = spec.n_regressors();
    let p = param_count(n_in, n_hidden);
    let n = target.len().saturating_sub(k0);
    if target.len() <= k0 || n <= p {
        return Err(Error::IllPosed(format!(
            "{n} fitted samples for {p} parameters ({output} model {spec}, {n_hidden} hidden)"
        )));
    }
    let norm_target: Vec<S> = target.iter().map(|y| output_norm.normalize(*y)).collect();
    let template = SubModel::new(Mlp::zeros(n_in, n_hidden), spec.clone(), output, output_norm, input_norms)?;
    let mut problem = OeProblem {
        model: template,
        data,
        init: target[..k0].to_vec(),
        target: norm_target,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.lm.seed);
    let mut best: Option<(S, Vec<S>, Vec<LmStep>)> = None;
    let mut restarts = 0;
    let mut last_failure = String::new();
    let mut successes = 0;
    while successes < cfg.starts.max(1) {
        if restarts > cfg.restarts {
            break;
        }
        let theta0 = Mlp::<S>::random_with(n_in, n_hidden, &mut rng).weights().to_vec();
        match lm_train(&mut problem, &theta0, &cfg.lm) {
            Ok(out) if out.sse.is_finite() => {
                successes += 1;
                if best.as_ref().is_none_or(|(s, _, _)| out.sse < *s) {
                    best = Some((out.sse, out.theta, out.history));
                }
            }
            Ok(_) => {
                restarts += 1;
                last_failure = "non-finite SSE".into();
            }
            Err(e) if e.is_numerical() => {
                restarts += 1;
                last_failure = e.to_string();
            }
            Err(e) => return Err(e),
        }
    }
    let (sse_norm, theta, history) = best.ok_or_else(|| Error::Training {
        restarts: restarts.saturating_sub(1),
        reason: format!("{output} model diverged: {last_failure}"),
    })?;
    problem.load(&theta)?;
    let scale = output_norm.scale.as_f64();
    Ok(FitResult {
        model: problem.model,
        sse: sse_norm.as_f64() * scale * scale,
        n,
        history,
        restarts,
    })
}
