use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::surrogate::{Channel, SignalLog};
use crate::sysid::fit::{fit_oe_model, FitConfig};
use crate::sysid::regressor::RegressorSpec;
use crate::sysid::submodel::SubModel;
use crate::textfmt::{push_line, KvDoc};

/// Channels each slot may read, in evaluation order.
const SLOTS: [(Channel, &str, &[Channel]); 4] = [
    (Channel::Speed, "speed.txt", &[Channel::PumpPosition]),
    (Channel::Pressure, "pressure.txt", &[Channel::PumpPosition, Channel::Speed]),
    (
        Channel::Airflow,
        "airflow.txt",
        &[Channel::PumpPosition, Channel::Speed, Channel::Pressure],
    ),
    (
        Channel::Opacity,
        "opacity.txt",
        &[Channel::PumpPosition, Channel::Speed, Channel::Pressure, Channel::Airflow],
    ),
];

/// Interconnected speed, pressure, airflow and opacity networks driven by the
/// pump position alone.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineModel<S> {
    speed: SubModel<S>,
    pressure: SubModel<S>,
    airflow: SubModel<S>,
    opacity: SubModel<S>,
    delay: usize,
}

fn min_delay(m: &SubModel<impl Scalar>, ch: Channel) -> Option<usize> {
    m.spec()
        .inputs
        .iter()
        .find(|i| i.channel == ch && i.lags > 0)
        .map(|i| i.delay)
}

impl<S: Scalar> EngineModel<S> {
    /// Connects four sub-models, checking output channels and wiring. The
    /// opacity delay `d` is the pump delay of the opacity network.
    pub fn assemble(
        speed: SubModel<S>,
        pressure: SubModel<S>,
        airflow: SubModel<S>,
        opacity: SubModel<S>,
    ) -> Result<Self> {
        let models = [&speed, &pressure, &airflow, &opacity];
        for (m, (want, _, allowed)) in models.iter().zip(SLOTS) {
            if m.output() != want {
                return Err(Error::Composition(format!(
                    "slot for {want} holds a model of {}",
                    m.output()
                )));
            }
            for i in &m.spec().inputs {
                if !allowed.contains(&i.channel) {
                    return Err(Error::Composition(format!(
                        "{want} model may not read {} within the interconnection",
                        i.channel
                    )));
                }
                if i.lags > 0 && i.delay == 0 {
                    return Err(Error::Composition(format!(
                        "{want} model reads {} without delay",
                        i.channel
                    )));
                }
            }
        }
        if min_delay(&speed, Channel::PumpPosition) != Some(1) {
            return Err(Error::Composition("speed model must read T(k-1)".into()));
        }
        for ch in [Channel::PumpPosition, Channel::Speed, Channel::Airflow] {
            if min_delay(&opacity, ch).is_none() {
                return Err(Error::Composition(format!("opacity model must read {ch}")));
            }
        }
        let delay = min_delay(&opacity, Channel::PumpPosition).expect("checked above");
        Ok(Self {
            speed,
            pressure,
            airflow,
            opacity,
            delay,
        })
    }

    pub fn speed(&self) -> &SubModel<S> {
        &self.speed
    }

    pub fn pressure(&self) -> &SubModel<S> {
        &self.pressure
    }

    pub fn airflow(&self) -> &SubModel<S> {
        &self.airflow
    }

    pub fn opacity(&self) -> &SubModel<S> {
        &self.opacity
    }

    /// Pure delay `d` between the pump position and opacity.
    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn submodel(&self, ch: Channel) -> Option<&SubModel<S>> {
        match ch {
            Channel::Speed => Some(&self.speed),
            Channel::Pressure => Some(&self.pressure),
            Channel::Airflow => Some(&self.airflow),
            Channel::Opacity => Some(&self.opacity),
            _ => None,
        }
    }

    fn submodels(&self) -> [&SubModel<S>; 4] {
        [&self.speed, &self.pressure, &self.airflow, &self.opacity]
    }

    /// Initial history length shared by every channel.
    pub fn max_lag(&self) -> usize {
        self.submodels().iter().map(|m| m.max_lag()).max().unwrap_or(0)
    }

    pub fn cast<T: Scalar>(&self) -> EngineModel<T> {
        EngineModel {
            speed: self.speed.cast(),
            pressure: self.pressure.cast(),
            airflow: self.airflow.cast(),
            opacity: self.opacity.cast(),
            delay: self.delay,
        }
    }

    /// Operating point reached with the pump held at `pump`, as a constant
    /// initial history.
    pub fn settle(&self, pump: S, steps: usize) -> Result<EngineInit<S>> {
        let k0 = self.max_lag();
        let means = self.submodels().map(|m| m.output_norm().mean);
        let mut init = EngineInit::constant(k0, means[0], means[1], means[2], means[3]);
        // Two passes: the second starts from the first pass's end point.
        for _ in 0..2 {
            let mut sim = EngineSimulator::new(self, &init)?;
            for _ in 0..k0 + steps {
                sim.push_pump(pump)?;
            }
            let n = sim.pump().len() - 1;
            init = EngineInit::constant(
                k0,
                sim.speed()[n],
                sim.pressure()[n],
                sim.airflow()[n],
                sim.opacity()[n],
            );
        }
        Ok(init)
    }

    /// Pump position whose settled model speed is `speed`, by bisection over
    /// `[0, 100]`; assumes settled speed increases with pump position.
    pub fn trim(&self, speed: S, steps: usize) -> Result<(S, EngineInit<S>)> {
        let settled_speed = |t: S| -> Result<S> { Ok(self.settle(t, steps)?.speed[0]) };
        let (mut lo, mut hi) = (S::zero(), S::of(100.0));
        let (r_lo, r_hi) = (settled_speed(lo)?, settled_speed(hi)?);
        if !(speed >= r_lo && speed <= r_hi) {
            return Err(Error::InvalidArgument(format!(
                "speed {speed} is outside the model's settled range [{r_lo}, {r_hi}]"
            )));
        }
        for _ in 0..40 {
            let mid = (lo + hi) * S::of(0.5);
            if settled_speed(mid)? < speed {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let pump = (lo + hi) * S::of(0.5);
        Ok((pump, self.settle(pump, steps)?))
    }

    /// Writes `manifest.txt` and one file per sub-model into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = String::from("# dieselnn engine model\n");
        for c in comments {
            manifest.push_str(&format!("# {c}\n"));
        }
        push_line(&mut manifest, "format", &[&"engine-model", &1]);
        push_line(&mut manifest, "delay", &[&self.delay]);
        for (m, (ch, file, _)) in self.submodels().iter().zip(SLOTS) {
            push_line(&mut manifest, "submodel", &[&ch, &file]);
            let mut wiring = format!("wiring {ch}");
            for i in &m.spec().inputs {
                wiring.push_str(&format!(" {}", i.channel));
            }
            manifest.push_str(&wiring);
            manifest.push('\n');
            fs::write(dir.join(file), m.to_text())?;
        }
        fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let doc = KvDoc::parse(&fs::read_to_string(dir.join("manifest.txt"))?);
        let fmt = doc.get("format")?;
        if fmt.value::<String>(0)? != "engine-model" {
            return Err(Error::format(fmt.line, "not an engine-model manifest"));
        }
        let mut subs = Vec::new();
        for (ch, _, _) in SLOTS {
            let line = doc
                .all("submodel")
                .find(|l| l.values.first().map(String::as_str) == Some(ch.name()))
                .ok_or_else(|| Error::format(0, format!("manifest lists no {ch} model")))?;
            line.expect_len(2)?;
            let file: String = line.value(1)?;
            let m = SubModel::from_text(&fs::read_to_string(dir.join(&file))?)?;
            if let Some(w) = doc
                .all("wiring")
                .find(|l| l.values.first().map(String::as_str) == Some(ch.name()))
            {
                let listed: Vec<&str> = w.values[1..].iter().map(String::as_str).collect();
                let actual: Vec<&str> = m.spec().inputs.iter().map(|i| i.channel.name()).collect();
                if listed != actual {
                    return Err(Error::format(w.line, format!("{ch} wiring disagrees with {file}")));
                }
            }
            subs.push(m);
        }
        let mut it = subs.into_iter();
        let model = Self::assemble(
            it.next().expect("four"),
            it.next().expect("four"),
            it.next().expect("four"),
            it.next().expect("four"),
        )?;
        let d = doc.get("delay")?;
        if d.value::<usize>(0)? != model.delay {
            return Err(Error::format(d.line, "delay disagrees with the opacity model"));
        }
        Ok(model)
    }
}

/// Initial output histories (at least `max_lag()` samples each).
#[derive(Debug, Clone, PartialEq)]
pub struct EngineInit<S> {
    pub speed: Vec<S>,
    pub pressure: Vec<S>,
    pub airflow: Vec<S>,
    pub opacity: Vec<S>,
}

impl<S: Scalar> EngineInit<S> {
    pub fn constant(len: usize, speed: S, pressure: S, airflow: S, opacity: S) -> Self {
        Self {
            speed: vec![speed; len],
            pressure: vec![pressure; len],
            airflow: vec![airflow; len],
            opacity: vec![opacity; len],
        }
    }

    /// First `len` measured samples of a log.
    pub fn from_log(log: &SignalLog, len: usize) -> Result<Self> {
        if log.len() < len {
            return Err(Error::IllPosed(format!(
                "log has {} samples, initial history needs {len}",
                log.len()
            )));
        }
        let take = |ch| log.channel(ch)[..len].iter().map(|v| S::of(*v)).collect();
        Ok(Self {
            speed: take(Channel::Speed),
            pressure: take(Channel::Pressure),
            airflow: take(Channel::Airflow),
            opacity: take(Channel::Opacity),
        })
    }

    fn get(&self, ch: Channel) -> &[S] {
        match ch {
            Channel::Speed => &self.speed,
            Channel::Pressure => &self.pressure,
            Channel::Airflow => &self.airflow,
            _ => &self.opacity,
        }
    }
}

/// Incremental composite simulation. Each pushed pump sample advances every
/// channel as far as its inputs allow, so the opacity trajectory runs `d`
/// samples ahead of the pump sequence.
#[derive(Debug, Clone)]
pub struct EngineSimulator<'m, S> {
    model: &'m EngineModel<S>,
    pump: Vec<S>,
    /// Speed, pressure, airflow, opacity.
    out: [Vec<S>; 4],
    k0: usize,
}

impl<'m, S: Scalar> EngineSimulator<'m, S> {
    pub fn new(model: &'m EngineModel<S>, init: &EngineInit<S>) -> Result<Self> {
        let k0 = model.max_lag();
        let mut out: [Vec<S>; 4] = Default::default();
        for (o, (ch, _, _)) in out.iter_mut().zip(SLOTS) {
            let h = init.get(ch);
            if h.len() < k0 {
                return Err(Error::IllPosed(format!(
                    "{ch} history has {} samples, the engine model needs {k0}",
                    h.len()
                )));
            }
            if !h[..k0].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("{ch} initial history")));
            }
            o.extend_from_slice(&h[..k0]);
        }
        Ok(Self {
            model,
            pump: Vec::new(),
            out,
            k0,
        })
    }

    pub fn model(&self) -> &'m EngineModel<S> {
        self.model
    }

    pub fn history_len(&self) -> usize {
        self.k0
    }

    pub fn pump(&self) -> &[S] {
        &self.pump
    }

    pub fn speed(&self) -> &[S] {
        &self.out[0]
    }

    pub fn pressure(&self) -> &[S] {
        &self.out[1]
    }

    pub fn airflow(&self) -> &[S] {
        &self.out[2]
    }

    pub fn opacity(&self) -> &[S] {
        &self.out[3]
    }

    pub fn channel(&self, ch: Channel) -> &[S] {
        match ch {
            Channel::PumpPosition => &self.pump,
            Channel::Speed => &self.out[0],
            Channel::Pressure => &self.out[1],
            Channel::Airflow => &self.out[2],
            Channel::Opacity => &self.out[3],
            Channel::FuelFlow => &[],
        }
    }

    fn inputs(&self, m: &SubModel<S>) -> Vec<&[S]> {
        m.spec().inputs.iter().map(|i| self.channel(i.channel)).collect()
    }

    pub fn push_pump(&mut self, pump: S) -> Result<()> {
        if !pump.is_finite() {
            return Err(Error::Simulation {
                index: self.pump.len(),
                reason: "non-finite pump position".into(),
            });
        }
        self.pump.push(pump);
        for slot in 0..4 {
            let m = self.model.submodels()[slot];
            // Highest index whose inputs are all known.
            let limit = m
                .spec()
                .inputs
                .iter()
                .filter(|i| i.lags > 0)
                .map(|i| self.channel(i.channel).len() + i.delay)
                .min()
                .expect("assembled models read at least one input");
            while self.out[slot].len() < limit {
                let k = self.out[slot].len();
                let x = m.regressor(k, &self.out[slot], &self.inputs(m));
                let v = m.predict(&x)?;
                if !v.is_finite() {
                    return Err(Error::Simulation {
                        index: k,
                        reason: format!("{} estimate not finite", m.output()),
                    });
                }
                self.out[slot].push(v);
            }
        }
        Ok(())
    }

    /// Direct partial `∂ŷ(k)/∂T(k - lag)` of one network, in normalised output
    /// units per pump percent. Paths through other estimated channels are
    /// ignored.
    pub fn pump_partial(&self, output: Channel, k: usize, lag: usize) -> Result<S> {
        let m = self
            .model
            .submodel(output)
            .ok_or_else(|| Error::InvalidArgument(format!("{output} is not a modelled channel")))?;
        let y = self.channel(output);
        if k < self.k0 || k >= y.len() {
            return Err(Error::IllPosed(format!(
                "{output} estimate at {k} not simulated (have {})",
                y.len()
            )));
        }
        let x = m.regressor(k, y, &self.inputs(m));
        m.input_partial(&x, Channel::PumpPosition, lag)
    }
}

/// Composite trajectories truncated to the pump sequence length.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineTrajectory<S> {
    pub pump: Vec<S>,
    pub speed: Vec<S>,
    pub pressure: Vec<S>,
    pub airflow: Vec<S>,
    pub opacity: Vec<S>,
}

impl<S: Scalar> EngineTrajectory<S> {
    pub fn channel(&self, ch: Channel) -> Option<&[S]> {
        match ch {
            Channel::PumpPosition => Some(&self.pump),
            Channel::Speed => Some(&self.speed),
            Channel::Pressure => Some(&self.pressure),
            Channel::Airflow => Some(&self.airflow),
            Channel::Opacity => Some(&self.opacity),
            Channel::FuelFlow => None,
        }
    }
}

/// Free-run simulation of the whole engine model from the pump sequence.
pub fn simulate_engine_model<S: Scalar>(
    model: &EngineModel<S>,
    pump: &[S],
    init: &EngineInit<S>,
) -> Result<EngineTrajectory<S>> {
    let mut sim = EngineSimulator::new(model, init)?;
    if pump.len() < sim.history_len() {
        return Err(Error::IllPosed(format!(
            "pump sequence has {} samples, the engine model needs {}",
            pump.len(),
            sim.history_len()
        )));
    }
    for &t in pump {
        sim.push_pump(t)?;
    }
    let n = pump.len();
    let cut = |v: &[S]| v[..n].to_vec();
    Ok(EngineTrajectory {
        pump: pump.to_vec(),
        speed: cut(sim.speed()),
        pressure: cut(sim.pressure()),
        airflow: cut(sim.airflow()),
        opacity: cut(sim.opacity()),
    })
}

/// Composite simulation driven by a log's pump channel, seeded from its first
/// samples.
pub fn simulate_on_log<S: Scalar>(model: &EngineModel<S>, log: &SignalLog) -> Result<EngineTrajectory<S>> {
    let init = EngineInit::from_log(log, model.max_lag())?;
    let pump: Vec<S> = log.channel(Channel::PumpPosition).into_iter().map(S::of).collect();
    simulate_engine_model(model, &pump, &init)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyConfig {
    pub speed: RegressorSpec,
    pub pressure: RegressorSpec,
    pub airflow: RegressorSpec,
    pub opacity: RegressorSpec,
    pub speed_hidden: usize,
    pub pressure_hidden: usize,
    pub airflow_hidden: usize,
    pub opacity_hidden: usize,
    pub fit: FitConfig,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            speed: RegressorSpec::speed_default(),
            pressure: RegressorSpec::pressure_default(),
            airflow: RegressorSpec::airflow_default(),
            opacity: RegressorSpec::opacity_default(4),
            speed_hidden: 6,
            pressure_hidden: 4,
            airflow_hidden: 4,
            opacity_hidden: 8,
            fit: FitConfig::default(),
        }
    }
}

impl IdentifyConfig {
    pub fn slot(&self, ch: Channel) -> Option<(&RegressorSpec, usize)> {
        match ch {
            Channel::Speed => Some((&self.speed, self.speed_hidden)),
            Channel::Pressure => Some((&self.pressure, self.pressure_hidden)),
            Channel::Airflow => Some((&self.airflow, self.airflow_hidden)),
            Channel::Opacity => Some((&self.opacity, self.opacity_hidden)),
            _ => None,
        }
    }
}

/// Sub-model fit summaries from [`identify_engine`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifySummary {
    pub channel: Channel,
    pub sse: f64,
    pub n: usize,
    pub p: usize,
    pub iterations: usize,
    pub restarts: usize,
}

/// Fits the four networks with measured inputs and assembles the composite.
pub fn identify_engine<S: Scalar>(
    log: &SignalLog,
    cfg: &IdentifyConfig,
) -> Result<(EngineModel<S>, Vec<IdentifySummary>)> {
    let mut subs = Vec::new();
    let mut summary = Vec::new();
    for (ch, _, _) in SLOTS {
        let (spec, hidden) = cfg.slot(ch).expect("modelled channel");
        let fit = fit_oe_model::<S>(log, ch, spec, hidden, &cfg.fit)?;
        summary.push(IdentifySummary {
            channel: ch,
            sse: fit.sse,
            n: fit.n,
            p: fit.n_params(),
            iterations: fit.history.len(),
            restarts: fit.restarts,
        });
        subs.push(fit.model);
    }
    let mut it = subs.into_iter();
    let model = EngineModel::assemble(
        it.next().expect("four"),
        it.next().expect("four"),
        it.next().expect("four"),
        it.next().expect("four"),
    )?;
    Ok((model, summary))
}

/// Root-mean-square error normalised by the range of `truth`.
pub fn nrmse(truth: &[f64], sim: &[f64]) -> Result<f64> {
    if truth.len() != sim.len() || truth.is_empty() {
        return Err(Error::shape(format!(
            "NRMSE needs equal non-empty series ({} vs {})",
            truth.len(),
            sim.len()
        )));
    }
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(Error::Domain("truth series has zero range".into()));
    }
    let mse = truth.iter().zip(sim).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64;
    Ok(mse.sqrt() / (hi - lo))
}

/// Indices of local maxima whose topographic prominence is at least
/// `min_prominence`.
pub fn find_peaks(x: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            // Walk across a plateau.
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                let peak = x[i];
                let mut left_min = peak;
                for &v in x[..i].iter().rev() {
                    if v > peak {
                        break;
                    }
                    left_min = left_min.min(v);
                }
                let mut right_min = peak;
                for &v in &x[j + 1..] {
                    if v > peak {
                        break;
                    }
                    right_min = right_min.min(v);
                }
                if peak - left_min.max(right_min) >= min_prominence {
                    peaks.push(i);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// For every reference peak, the nearest candidate within `tolerance` samples.
pub fn match_peaks(reference: &[usize], candidates: &[usize], tolerance: usize) -> Vec<Option<usize>> {
    reference
        .iter()
        .map(|&r| {
            candidates
                .iter()
                .copied()
                .filter(|&c| c.abs_diff(r) <= tolerance)
                .min_by_key(|&c| c.abs_diff(r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Mlp;
    use crate::sysid::regressor::Affine;

    fn sub(output: Channel, spec: RegressorSpec, seed: u64) -> SubModel<f64> {
        let n = spec.inputs.len();
        SubModel::new(
            Mlp::random(spec.n_regressors(), 3, seed),
            spec,
            output,
            Affine::new(10.0, 2.0).unwrap(),
            vec![Affine::new(5.0, 3.0).unwrap(); n],
        )
        .unwrap()
    }

    fn toy() -> EngineModel<f64> {
        EngineModel::assemble(
            sub(Channel::Speed, RegressorSpec::speed_default(), 1),
            sub(Channel::Pressure, RegressorSpec::pressure_default(), 2),
            sub(Channel::Airflow, RegressorSpec::airflow_default(), 3),
            sub(Channel::Opacity, RegressorSpec::opacity_default(4), 4),
        )
        .unwrap()
    }

    #[test]
    fn assemble_checks_wiring() {
        let m = toy();
        assert_eq!(m.delay(), 4);
        assert_eq!(m.max_lag(), 4);
        let swapped = EngineModel::assemble(
            sub(Channel::Pressure, RegressorSpec::pressure_default(), 2),
            sub(Channel::Speed, RegressorSpec::speed_default(), 1),
            sub(Channel::Airflow, RegressorSpec::airflow_default(), 3),
            sub(Channel::Opacity, RegressorSpec::opacity_default(4), 4),
        );
        assert!(matches!(swapped, Err(Error::Composition(_))));
        let cyclic = RegressorSpec::new(
            2,
            vec![
                crate::sysid::InputLags::new(Channel::PumpPosition, 1, 1),
                crate::sysid::InputLags::new(Channel::Opacity, 1, 1),
            ],
        );
        let r = EngineModel::assemble(
            sub(Channel::Speed, cyclic, 1),
            sub(Channel::Pressure, RegressorSpec::pressure_default(), 2),
            sub(Channel::Airflow, RegressorSpec::airflow_default(), 3),
            sub(Channel::Opacity, RegressorSpec::opacity_default(4), 4),
        );
        assert!(matches!(r, Err(Error::Composition(_))));
    }

    #[test]
    fn opacity_runs_ahead_of_the_pump() {
        let m = toy();
        let init = EngineInit::constant(4, 10.0, 10.0, 10.0, 10.0);
        let mut sim = EngineSimulator::new(&m, &init).unwrap();
        for _ in 0..6 {
            sim.push_pump(7.0).unwrap();
        }
        assert_eq!(sim.speed().len(), 7);
        assert_eq!(sim.pressure().len(), 8);
        assert_eq!(sim.airflow().len(), 8);
        assert_eq!(sim.opacity().len(), 10);
    }

    #[test]
    fn repeated_simulation_is_identical() {
        let m = toy();
        let init = EngineInit::constant(4, 9.0, 11.0, 10.0, 12.0);
        let pump: Vec<f64> = (0..60).map(|k| (k as f64 * 0.3).sin() * 4.0 + 5.0).collect();
        let a = simulate_engine_model(&m, &pump, &init).unwrap();
        let b = simulate_engine_model(&m, &pump, &init).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.opacity.len(), 60);
    }

    #[test]
    fn short_init_is_ill_posed() {
        let m = toy();
        let init = EngineInit::constant(3, 9.0, 11.0, 10.0, 12.0);
        assert!(matches!(EngineSimulator::new(&m, &init), Err(Error::IllPosed(_))));
    }

    #[test]
    fn directory_round_trip() {
        let m = toy();
        let dir = tempfile::tempdir().unwrap();
        m.save_dir(dir.path(), &["digest abc".into()]).unwrap();
        assert_eq!(EngineModel::<f64>::load_dir(dir.path()).unwrap(), m);
    }

    #[test]
    fn nrmse_and_peaks() {
        assert_eq!(nrmse(&[0.0, 2.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!((nrmse(&[0.0, 4.0], &[1.0, 5.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!(nrmse(&[1.0, 1.0], &[1.0, 1.0]).is_err());
        let x = [0.0, 1.0, 5.0, 2.0, 2.0, 2.5, 2.2, 0.0, 3.0, 3.0, 1.0];
        assert_eq!(find_peaks(&x, 0.0), vec![2, 5, 8]);
        assert_eq!(find_peaks(&x, 1.0), vec![2, 8]);
        assert_eq!(match_peaks(&[2, 8], &[4, 20], 3), vec![Some(4), None]);
    }
}
