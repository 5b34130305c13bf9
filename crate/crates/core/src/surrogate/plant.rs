use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::signal::{SignalLog, SignalRecord};

/// Coefficients of the surrogate engine.
///
/// With speed `R` (rpm), boost `P` (kPa), smoke-filtered opacity `Op` (%) and
/// pump position `T` (%), one sample advances as
///
/// ```text
/// mf(k)   = fuel_gain · T(k) · (0.5 + R(k)/fuel_speed_ref)
/// m(k)    = airflow_gain · P(k) · R(k) / 60
/// φ(k)    = mf(k) / m(k)
/// η(k)    = 1 / (1 + exp(efficiency_slope · (φ(k) − efficiency_knee · φs)))
/// s(k)    = 100 / (1 + exp(−smoke_slope · (φ(k) − smoke_knee · φs)))
/// P(k+1)  = P(k) + Ts/boost_tau · (ambient + boost_gain · R(k) − P(k))
/// R(k+1)  = max(idle, R(k) + Ts · (torque_gain · mf · η − drag_linear · R − drag_quadratic · R²))
/// Op(k+1) = Op(k) + Ts/opacity_tau · (s(k − smoke_delay) − Op(k))
/// ```
///
/// so a pump move at `k` first shows in opacity at `k + smoke_delay + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub ts: f64,
    pub fuel_gain: f64,
    pub fuel_speed_ref: f64,
    pub torque_gain: f64,
    pub drag_linear: f64,
    pub drag_quadratic: f64,
    pub idle_speed: f64,
    pub ambient_pressure: f64,
    pub boost_gain: f64,
    pub boost_tau: f64,
    pub airflow_gain: f64,
    pub stoich_fuel_air: f64,
    pub efficiency_knee: f64,
    pub efficiency_slope: f64,
    pub smoke_knee: f64,
    pub smoke_slope: f64,
    pub opacity_tau: f64,
    pub smoke_delay: usize,
    pub noise: NoiseParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub speed: f64,
    pub pressure: f64,
    pub opacity: f64,
    pub airflow: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            speed: 5.0,
            pressure: 0.5,
            opacity: 0.5,
            airflow: 0.02,
            seed: 7,
        }
    }
}

impl NoiseParams {
    pub fn none() -> Self {
        Self {
            speed: 0.0,
            pressure: 0.0,
            opacity: 0.0,
            airflow: 0.0,
            seed: 0,
        }
    }

    fn is_silent(&self) -> bool {
        self.speed == 0.0 && self.pressure == 0.0 && self.opacity == 0.0 && self.airflow == 0.0
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            ts: 0.1,
            fuel_gain: 0.004,
            fuel_speed_ref: 2000.0,
            torque_gain: 2000.0,
            drag_linear: 0.15,
            drag_quadratic: 5e-5,
            idle_speed: 600.0,
            ambient_pressure: 100.0,
            boost_gain: 0.04,
            boost_tau: 0.8,
            airflow_gain: 0.0015,
            stoich_fuel_air: 1.0 / 14.6,
            efficiency_knee: 1.5,
            efficiency_slope: 20.0,
            smoke_knee: 1.1,
            smoke_slope: 60.0,
            opacity_tau: 0.5,
            smoke_delay: 3,
            noise: NoiseParams::default(),
        }
    }
}

impl PlantParams {
    /// Coefficient set without idle floor and with the slower torque/drag
    /// balance. The engine stalls irreversibly from ordinary operating
    /// points with this set; it is kept for comparison runs only.
    pub fn literal() -> Self {
        Self {
            torque_gain: 1400.0,
            drag_linear: 0.12,
            drag_quadratic: 2e-5,
            idle_speed: 0.0,
            airflow_gain: 0.0009,
            ..Self::default()
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise = NoiseParams::none();
        self
    }

    /// Samples between a pump move and its first effect on opacity.
    pub fn opacity_delay(&self) -> usize {
        self.smoke_delay + 1
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ts", self.ts),
            ("fuel_gain", self.fuel_gain),
            ("fuel_speed_ref", self.fuel_speed_ref),
            ("torque_gain", self.torque_gain),
            ("boost_gain", self.boost_gain),
            ("boost_tau", self.boost_tau),
            ("airflow_gain", self.airflow_gain),
            ("stoich_fuel_air", self.stoich_fuel_air),
            ("opacity_tau", self.opacity_tau),
            ("ambient_pressure", self.ambient_pressure),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("plant `{name}` must be positive")));
            }
        }
        let non_negative = [
            ("drag_linear", self.drag_linear),
            ("drag_quadratic", self.drag_quadratic),
            ("idle_speed", self.idle_speed),
            ("noise.speed", self.noise.speed),
            ("noise.pressure", self.noise.pressure),
            ("noise.opacity", self.noise.opacity),
            ("noise.airflow", self.noise.airflow),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("plant `{name}` must be non-negative")));
            }
        }
        if self.ts >= self.boost_tau || self.ts >= self.opacity_tau {
            return Err(Error::InvalidArgument(
                "sample period must be shorter than the boost and opacity lags".into(),
            ));
        }
        Ok(())
    }

    fn fuel_flow(&self, pump: f64, speed: f64) -> f64 {
        self.fuel_gain * pump * (0.5 + speed / self.fuel_speed_ref)
    }

    fn airflow(&self, pressure: f64, speed: f64) -> f64 {
        self.airflow_gain * pressure * speed / 60.0
    }

    fn fuel_air_ratio(&self, fuel: f64, air: f64) -> f64 {
        if fuel <= 0.0 {
            0.0
        } else if air <= 0.0 {
            f64::INFINITY
        } else {
            fuel / air
        }
    }

    fn efficiency(&self, phi: f64) -> f64 {
        1.0 / (1.0 + (self.efficiency_slope * (phi - self.efficiency_knee * self.stoich_fuel_air)).exp())
    }

    fn smoke(&self, phi: f64) -> f64 {
        100.0 / (1.0 + (-self.smoke_slope * (phi - self.smoke_knee * self.stoich_fuel_air)).exp())
    }
}

/// Noise-free internal state of the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub k: u64,
    pub speed: f64,
    pub pressure: f64,
    pub opacity: f64,
    /// Raw smoke `s(k - smoke_delay) ..= s(k - 1)`, oldest first.
    smoke_history: VecDeque<f64>,
}

impl PlantState {
    /// State with boost and opacity at equilibrium for the given speed and pump
    /// position (speed itself is not settled).
    pub fn at(params: &PlantParams, speed: f64, pump: f64) -> Self {
        let pressure = params.ambient_pressure + params.boost_gain * speed;
        let phi = params.fuel_air_ratio(params.fuel_flow(pump, speed), params.airflow(pressure, speed));
        let s = params.smoke(phi);
        Self {
            k: 0,
            speed,
            pressure,
            opacity: s,
            smoke_history: std::iter::repeat(s).take(params.smoke_delay).collect(),
        }
    }

    /// Runs the noise-free plant at constant pump position until it settles
    /// (or `max_steps` elapse) and resets the sample counter.
    pub fn settled(params: &PlantParams, pump: f64, max_steps: usize) -> Result<Self> {
        let start = params.idle_speed.max(1000.0);
        let mut state = Self::at(params, start, pump);
        let quiet = params.clone().noiseless();
        let mut last = state.speed;
        for i in 0..max_steps {
            step_state(&quiet, &mut state, pump)?;
            if i > 50 && (state.speed - last).abs() < 1e-13 * state.speed.max(1.0) {
                break;
            }
            last = state.speed;
        }
        state.k = 0;
        Ok(state)
    }

    /// Pump position whose settled speed is `speed` (bisection over `[0, 100]`).
    pub fn trim(params: &PlantParams, speed: f64) -> Result<(f64, PlantState)> {
        let (mut lo, mut hi) = (0.0_f64, 100.0_f64);
        let max_speed = Self::settled(params, hi, 20_000)?.speed;
        if speed > max_speed || speed < params.idle_speed {
            return Err(Error::InvalidArgument(format!(
                "speed {speed} rpm is outside the reachable range [{}, {max_speed:.0}]",
                params.idle_speed
            )));
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if Self::settled(params, mid, 20_000)?.speed < speed {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let pump = 0.5 * (lo + hi);
        Ok((pump, Self::settled(params, pump, 20_000)?))
    }
}

/// Advances the state by one sample; returns the noise-free record at `k`.
fn step_state(params: &PlantParams, state: &mut PlantState, pump: f64) -> Result<SignalRecord> {
    if !pump.is_finite() {
        return Err(Error::Simulation {
            index: state.k as usize,
            reason: "non-finite pump position".into(),
        });
    }
    let pump = pump.clamp(0.0, 100.0);
    let (r, p, op) = (state.speed, state.pressure, state.opacity);
    if !(r.is_finite() && p.is_finite() && op.is_finite()) {
        return Err(Error::Simulation {
            index: state.k as usize,
            reason: "non-finite plant state".into(),
        });
    }
    let fuel = params.fuel_flow(pump, r);
    let air = params.airflow(p, r);
    let phi = params.fuel_air_ratio(fuel, air);
    let eta = params.efficiency(phi);
    let smoke = params.smoke(phi);

    let record = SignalRecord {
        k: state.k,
        t: state.k as f64 * params.ts,
        pump,
        speed: r,
        pressure: p,
        airflow: air,
        fuel_flow: fuel,
        opacity: op,
    };

    state.smoke_history.push_back(smoke);
    let delayed = state
        .smoke_history
        .pop_front()
        .expect("smoke history holds smoke_delay + 1 samples");
    state.pressure = p + params.ts / params.boost_tau * (params.ambient_pressure + params.boost_gain * r - p);
    let torque = params.torque_gain * fuel * eta;
    let drag = params.drag_linear * r + params.drag_quadratic * r * r;
    state.speed = (r + params.ts * (torque - drag)).max(params.idle_speed);
    state.opacity = op + params.ts / params.opacity_tau * (delayed - op);
    state.k += 1;
    Ok(record)
}

/// The surrogate engine: noise-free state plus a seeded measurement-noise source.
#[derive(Debug, Clone)]
pub struct Plant {
    params: PlantParams,
    state: PlantState,
    noise: Option<(ChaCha8Rng, [Normal<f64>; 4])>,
}

impl Plant {
    pub fn new(params: PlantParams, initial: PlantState) -> Result<Self> {
        params.validate()?;
        let noise = if params.noise.is_silent() {
            None
        } else {
            let n = &params.noise;
            let dist = |s: f64| Normal::new(0.0, s).expect("validated non-negative sigma");
            Some((
                ChaCha8Rng::seed_from_u64(n.seed),
                [dist(n.speed), dist(n.pressure), dist(n.airflow), dist(n.opacity)],
            ))
        };
        Ok(Self {
            params,
            state: initial,
            noise,
        })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    /// Applies `pump` over the current sample and returns the measured record
    /// for that sample. Noise only touches the returned record.
    pub fn step(&mut self, pump: f64) -> Result<SignalRecord> {
        let mut rec = step_state(&self.params, &mut self.state, pump)?;
        if let Some((rng, [ns, np, nm, no])) = self.noise.as_mut() {
            rec.speed += ns.sample(rng);
            rec.pressure += np.sample(rng);
            rec.airflow += nm.sample(rng);
            rec.opacity += no.sample(rng);
        }
        Ok(rec)
    }

    /// Closed-loop step: `control` sees the measured speed, pressure, airflow
    /// and opacity of the current sample (pump and fuel fields are not yet
    /// set) and returns the pump position applied over that sample.
    pub fn step_with(&mut self, control: impl FnOnce(&SignalRecord) -> Result<f64>) -> Result<SignalRecord> {
        let mut probe = self.state.clone();
        let mut seen = step_state(&self.params, &mut probe, 0.0)?;
        let noise = self
            .noise
            .as_mut()
            .map(|(rng, [ns, np, nm, no])| [ns.sample(rng), np.sample(rng), nm.sample(rng), no.sample(rng)]);
        if let Some([a, b, c, d]) = noise {
            seen.speed += a;
            seen.pressure += b;
            seen.airflow += c;
            seen.opacity += d;
        }
        let pump = control(&seen)?;
        let rec = step_state(&self.params, &mut self.state, pump)?;
        Ok(SignalRecord {
            pump: rec.pump,
            fuel_flow: rec.fuel_flow,
            ..seen
        })
    }
}

/// One plant step on a bare state, without measurement noise.
pub fn plant_step(params: &PlantParams, state: &mut PlantState, pump: f64) -> Result<SignalRecord> {
    step_state(params, state, pump)
}

/// Folds [`Plant::step`] over a pump sequence.
pub fn simulate_plant(params: &PlantParams, pump: &[f64], initial: PlantState) -> Result<SignalLog> {
    let mut plant = Plant::new(params.clone(), initial)?;
    let records = pump.iter().map(|&u| plant.step(u)).collect::<Result<Vec<_>>>()?;
    SignalLog::new(params.ts, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> PlantParams {
        PlantParams::default().noiseless()
    }

    #[test]
    fn zero_fuel_decays_to_idle_and_clears_smoke() {
        let p = quiet();
        let init = PlantState::at(&p, 2500.0, 40.0);
        let log = simulate_plant(&p, &vec![0.0; 600], init).unwrap();
        let r = log.channel(crate::surrogate::Channel::Speed);
        assert!(r.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.last().unwrap() - p.idle_speed).abs() < 1e-9);
        let op = *log.records().last().map(|x| &x.opacity).unwrap();
        // zero fuel leaves only the smoke-map floor
        assert!(op < 1.2, "{op}");
    }

    #[test]
    fn settled_state_is_a_fixed_point() {
        let p = quiet();
        let s = PlantState::settled(&p, 50.0, 20_000).unwrap();
        let mut t = s.clone();
        for _ in 0..10 {
            plant_step(&p, &mut t, 50.0).unwrap();
        }
        assert!((t.speed - s.speed).abs() < 1e-6);
        assert!((t.opacity - s.opacity).abs() < 1e-6);
    }

    #[test]
    fn delayed_smoke_reaches_opacity_after_four_samples() {
        let p = quiet();
        let mut s = PlantState::settled(&p, 40.0, 20_000).unwrap();
        let op0 = s.opacity;
        let mut ops = Vec::new();
        plant_step(&p, &mut s, 80.0).unwrap();
        for _ in 0..5 {
            ops.push(s.opacity);
            plant_step(&p, &mut s, 80.0).unwrap();
        }
        // ops[j] is Op(k + 1 + j) after a move at k
        for op in &ops[..3] {
            assert!((op - op0).abs() < 1e-9);
        }
        assert!(ops[3] > op0 + 1.0);
    }

    #[test]
    fn noise_only_touches_measurements() {
        let clean = quiet();
        let noisy = PlantParams::default();
        let init = PlantState::settled(&clean, 45.0, 20_000).unwrap();
        let pump = vec![45.0, 60.0, 60.0, 30.0, 30.0];
        let mut a = Plant::new(clean, init.clone()).unwrap();
        let mut b = Plant::new(noisy, init).unwrap();
        for &u in &pump {
            let ra = a.step(u).unwrap();
            let rb = b.step(u).unwrap();
            assert_ne!(ra.speed, rb.speed);
            assert_eq!(ra.fuel_flow, rb.fuel_flow);
        }
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = PlantParams {
            boost_tau: -1.0,
            ..PlantParams::default()
        };
        assert!(Plant::new(p, PlantState::at(&quiet(), 1000.0, 30.0)).is_err());
    }

    #[test]
    fn non_finite_pump_faults() {
        let p = quiet();
        let mut s = PlantState::at(&p, 1000.0, 30.0);
        assert!(matches!(
            plant_step(&p, &mut s, f64::NAN),
            Err(Error::Simulation { .. })
        ));
    }

    #[test]
    fn pump_is_clamped() {
        let p = quiet();
        let mut s = PlantState::at(&p, 1500.0, 30.0);
        assert_eq!(plant_step(&p, &mut s, 140.0).unwrap().pump, 100.0);
        assert_eq!(plant_step(&p, &mut s, -3.0).unwrap().pump, 0.0);
    }

    #[test]
    fn literal_coefficients_stall_at_low_fuel() {
        let p = PlantParams::literal().noiseless();
        let init = PlantState::at(&p, 1200.0, 20.0);
        let log = simulate_plant(&p, &vec![20.0; 3000], init).unwrap();
        assert!(log.records().last().unwrap().speed < 1.0);
    }
}
