use serde::{Deserialize, Serialize};

use crate::closed_loop::ReferenceProfile;
use crate::control::controller::{Controller, ControllerInputs};
use crate::control::rls::{CriterionWeights, RlsState, SensitivityPair};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::surrogate::Channel;
use crate::sysid::{EngineInit, EngineModel, EngineSimulator};

/// Form of the opacity error `e_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpacityError {
    /// `Op_ref − Ôp`, as written in the criterion.
    Symmetric,
    /// `min(0, Op_ref − Ôp)`: only opacity above the constraint is penalised.
    /// `Ψ_z` is kept, so the covariance still learns the opacity direction
    /// while the constraint is inactive.
    #[default]
    Excess,
}

/// Error sensitivities after the pump sample `T(k)` has been pushed:
/// `Ψ_y = −(∂R̂(k+1)/∂T(k))·dU/dW` and `Ψ_z = −(∂Ôp(k+d)/∂T(k))·dU/dW`, with
/// errors `R_ref(k+1) − R̂(k+1)` and `Op_ref(k+d) − Ôp(k+d)` in normalised
/// units. Only the direct pump input of each network is differentiated.
pub fn sensitivity_psi<S: Scalar>(
    sim: &EngineSimulator<'_, S>,
    du_dw: &[S],
    k: usize,
    speed_ref: S,
    opacity_ref: S,
    form: OpacityError,
) -> Result<SensitivityPair<S>> {
    let model = sim.model();
    let d = model.delay();
    if sim.pump().len() != k + 1 {
        return Err(Error::IllPosed(format!(
            "sensitivities at step {k} need exactly {} pump samples, have {}",
            k + 1,
            sim.pump().len()
        )));
    }
    let gy = sim.pump_partial(Channel::Speed, k + 1, 1)?;
    let gz = sim.pump_partial(Channel::Opacity, k + d, d)?;
    let (rn, on) = (model.speed().output_norm(), model.opacity().output_norm());
    let mut e_z = (opacity_ref - sim.opacity()[k + d]) / on.scale;
    if form == OpacityError::Excess && e_z > S::zero() {
        e_z = S::zero();
    }
    Ok(SensitivityPair {
        psi_y: du_dw.iter().map(|g| -gy * *g).collect(),
        psi_z: du_dw.iter().map(|g| -gz * *g).collect(),
        e_y: (speed_ref - sim.speed()[k + 1]) / rn.scale,
        e_z,
    })
}

/// Closed-loop trajectories of one episode against the engine model,
/// truncated to the profile length.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace<S> {
    pub pump: Vec<S>,
    pub speed: Vec<S>,
    pub pressure: Vec<S>,
    pub airflow: Vec<S>,
    pub opacity: Vec<S>,
    /// `½ Σ (η_y e_y² + η_z e_z²)` over the controlled steps, normalised units.
    pub criterion: f64,
}

/// Trim point that starts every episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStart<S> {
    pub pump: S,
    pub init: EngineInit<S>,
}

impl<S: Scalar> EpisodeStart<S> {
    /// Model operating point at the first reference speed.
    pub fn trim(model: &EngineModel<S>, profile: &ReferenceProfile, settle_steps: usize) -> Result<Self> {
        let (pump, init) = model.trim(S::of(profile.speed_at(0)), settle_steps)?;
        Ok(Self { pump, init })
    }
}

/// Runs the controller through the engine model over the profile. With
/// `learn`, every step applies the two-output Gauss-Newton update and the
/// controller follows the updated weights.
pub fn run_model_episode<S: Scalar>(
    model: &EngineModel<S>,
    controller: &mut Controller<S>,
    profile: &ReferenceProfile,
    start: &EpisodeStart<S>,
    weights: &CriterionWeights,
    form: OpacityError,
    mut learn: Option<&mut RlsState<S>>,
) -> Result<EpisodeTrace<S>> {
    if controller.delay() != model.delay() {
        return Err(Error::shape(format!(
            "controller delay {} differs from model delay {}",
            controller.delay(),
            model.delay()
        )));
    }
    if let Some(rls) = learn.as_deref() {
        if rls.n() != controller.n_params() {
            return Err(Error::shape(format!(
                "RLS state has {} weights, controller {}",
                rls.n(),
                controller.n_params()
            )));
        }
    }
    let d = model.delay();
    let n = profile.len();
    let mut sim = EngineSimulator::new(model, &start.init)?;
    let k0 = sim.history_len();
    if n <= k0 + 1 {
        return Err(Error::IllPosed(format!("profile of {n} samples is shorter than the model history")));
    }
    for _ in 0..k0 {
        sim.push_pump(start.pump)?;
    }
    let (eta_y, eta_z) = (weights.eta_y, weights.eta_z);
    let mut criterion = 0.0;
    for k in k0..n {
        let inputs = ControllerInputs {
            speed_ref: S::of(profile.speed_at(k + 1)),
            speed: sim.speed()[k],
            speed_prev: sim.speed()[k - 1],
            opacity_ref: S::of(profile.opacity_at(k + d)),
            opacity: sim.opacity()[k + d - 1],
        };
        let (u, du_dw) = controller.eval(&inputs)?;
        sim.push_pump(u)?;
        let pair = sensitivity_psi(&sim, &du_dw, k, inputs.speed_ref, inputs.opacity_ref, form)?;
        let (ey, ez) = (pair.e_y.as_f64(), pair.e_z.as_f64());
        criterion += 0.5 * (eta_y * ey * ey + eta_z * ez * ez);
        if let Some(rls) = learn.as_deref_mut() {
            rls.update_multi(&pair, weights)?;
            controller.set_weights(&rls.w)?;
        }
    }
    if !criterion.is_finite() {
        return Err(Error::NonFinite("episode criterion".into()));
    }
    let cut = |v: &[S]| v[..n].to_vec();
    Ok(EpisodeTrace {
        pump: cut(sim.pump()),
        speed: cut(sim.speed()),
        pressure: cut(sim.pressure()),
        airflow: cut(sim.airflow()),
        opacity: cut(sim.opacity()),
        criterion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Initial covariance scale `P0 = δ·I`, reset every epoch.
    pub delta: f64,
    pub hidden: usize,
    pub seed: u64,
    pub opacity_error: OpacityError,
    /// Samples used to settle the model when trimming.
    pub settle_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            delta: 1000.0,
            hidden: 4,
            seed: 1,
            opacity_error: OpacityError::default(),
            settle_steps: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidArgument("controller needs at least one hidden node".into()));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub rmse_speed: f64,
    pub max_opacity: f64,
    pub eta_op: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub controller: Controller<S>,
    /// Epoch 0 evaluates the initial controller.
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

fn evaluate<S: Scalar>(
    model: &EngineModel<S>,
    controller: &Controller<S>,
    profile: &ReferenceProfile,
    start: &EpisodeStart<S>,
    weights: &CriterionWeights,
    form: OpacityError,
    epoch: usize,
) -> Result<EpochMetrics> {
    let mut c = controller.clone();
    let trace = run_model_episode(model, &mut c, profile, start, weights, form, None)?;
    let n = profile.len() as f64;
    let mse = trace
        .speed
        .iter()
        .zip(profile.speed_ref())
        .map(|(r, rr)| (r.as_f64() - rr).powi(2))
        .sum::<f64>()
        / n;
    Ok(EpochMetrics {
        epoch,
        j: trace.criterion,
        rmse_speed: mse.sqrt(),
        max_opacity: trace.opacity.iter().map(|o| o.as_f64()).fold(f64::NEG_INFINITY, f64::max),
        eta_op: weights.eta_z,
    })
}

/// Specialized training through the engine model: each epoch resets `P` and
/// the model to the trim point, runs the profile with per-step updates and
/// then evaluates the frozen controller. Returns the controller with the
/// lowest evaluated criterion.
pub fn train_controller<S: Scalar>(
    model: &EngineModel<S>,
    profile: &ReferenceProfile,
    weights: &CriterionWeights,
    initial: Controller<S>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<S>> {
    weights.validate()?;
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            controller: initial,
            metrics: Vec::new(),
            best_epoch: 0,
        });
    }
    let start = EpisodeStart::trim(model, profile, cfg.settle_steps)?;
    let mut metrics = vec![evaluate(model, &initial, profile, &start, weights, cfg.opacity_error, 0)?];
    let mut best = (metrics[0].j, initial.clone(), 0);
    let mut controller = initial;
    let mut rls = RlsState::new(controller.weights().to_vec(), S::of(cfg.delta))?;
    for epoch in 1..=cfg.epochs {
        rls.reset_covariance();
        let abort = |e: Error| Error::Training {
            restarts: 0,
            reason: format!("epoch {epoch}: {e}; log: {metrics:?}"),
        };
        run_model_episode(model, &mut controller, profile, &start, weights, cfg.opacity_error, Some(&mut rls)).map_err(abort)?;
        let m = evaluate(model, &controller, profile, &start, weights, cfg.opacity_error, epoch).map_err(abort)?;
        if !m.j.is_finite() {
            return Err(abort(Error::NonFinite("criterion".into())));
        }
        if m.j < best.0 {
            best = (m.j, controller.clone(), epoch);
        }
        metrics.push(m);
    }
    Ok(TrainOutcome {
        controller: best.1,
        metrics,
        best_epoch: best.2,
    })
}

/// Training log CSV `epoch,J,rmse_speed,max_opacity,eta_op`.
pub fn write_metrics_csv<W: std::io::Write>(metrics: &[EpochMetrics], w: W, comments: &[String]) -> Result<()> {
    let mut w = w;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    for m in metrics {
        out.serialize(m)?;
    }
    if metrics.is_empty() {
        out.write_record(["epoch", "J", "rmse_speed", "max_opacity", "eta_op"])?;
    }
    out.flush()?;
    Ok(())
}
