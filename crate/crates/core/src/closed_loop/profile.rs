use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysid::EngineModel;

/// Speed levels accepted in a reference, rpm.
pub const SPEED_ENVELOPE: (f64, f64) = (600.0, 4500.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileStep {
    /// Start time of the level, s.
    pub time: f64,
    /// Speed level, rpm.
    pub speed: f64,
}

/// How the opacity constraint `Op_ref` is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OpRefMode {
    /// Constant ceiling in percent.
    Ceiling { level: f64 },
    /// The model's settled opacity at each speed level.
    SteadyMap,
}

impl Default for OpRefMode {
    fn default() -> Self {
        OpRefMode::Ceiling { level: 15.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSpec {
    pub steps: Vec<ProfileStep>,
    pub duration: f64,
    pub op_ref: OpRefMode,
}

impl Default for ProfileSpec {
    /// 1200 → 2000 → 2800 → 1600 rpm over 60 s with a 15 % opacity ceiling.
    fn default() -> Self {
        let step = |time, speed| ProfileStep { time, speed };
        Self {
            steps: vec![step(0.0, 1200.0), step(15.0, 2000.0), step(30.0, 2800.0), step(45.0, 1600.0)],
            duration: 60.0,
            op_ref: OpRefMode::default(),
        }
    }
}

/// Sampled speed reference and opacity constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    ts: f64,
    speed_ref: Vec<f64>,
    opacity_ref: Vec<f64>,
}

impl ReferenceProfile {
    pub fn new(ts: f64, speed_ref: Vec<f64>, opacity_ref: Vec<f64>) -> Result<Self> {
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample period must be positive, got {ts}")));
        }
        if speed_ref.is_empty() || speed_ref.len() != opacity_ref.len() {
            return Err(Error::shape(format!(
                "reference lengths {} and {} must be equal and non-zero",
                speed_ref.len(),
                opacity_ref.len()
            )));
        }
        let (lo, hi) = SPEED_ENVELOPE;
        if let Some(k) = speed_ref.iter().position(|r| !(lo..=hi).contains(r)) {
            return Err(Error::InvalidArgument(format!(
                "speed reference {} at sample {k} outside [{lo}, {hi}] rpm",
                speed_ref[k]
            )));
        }
        if let Some(k) = opacity_ref.iter().position(|o| !(0.0..=100.0).contains(o)) {
            return Err(Error::InvalidArgument(format!(
                "opacity constraint {} at sample {k} outside [0, 100] %",
                opacity_ref[k]
            )));
        }
        Ok(Self {
            ts,
            speed_ref,
            opacity_ref,
        })
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.speed_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed_ref.is_empty()
    }

    pub fn speed_ref(&self) -> &[f64] {
        &self.speed_ref
    }

    pub fn opacity_ref(&self) -> &[f64] {
        &self.opacity_ref
    }

    /// Speed reference at `k`, held at its last value past the end.
    pub fn speed_at(&self, k: usize) -> f64 {
        self.speed_ref[k.min(self.len() - 1)]
    }

    pub fn opacity_at(&self, k: usize) -> f64 {
        self.opacity_ref[k.min(self.len() - 1)]
    }

    /// Sample indices where the speed reference changes.
    pub fn step_indices(&self) -> Vec<usize> {
        (1..self.len())
            .filter(|&k| self.speed_ref[k] != self.speed_ref[k - 1])
            .collect()
    }

    /// Sample mask of the `±half_width` seconds windows around every step.
    pub fn transient_mask(&self, half_width: f64) -> Vec<bool> {
        let w = (half_width / self.ts).round() as usize;
        let mut mask = vec![false; self.len()];
        for s in self.step_indices() {
            let lo = s.saturating_sub(w);
            let hi = (s + w).min(self.len() - 1);
            mask[lo..=hi].iter_mut().for_each(|m| *m = true);
        }
        mask
    }
}

/// Samples a step profile. `SteadyMap` needs the engine model to settle at
/// each level.
pub fn build_profile(
    spec: &ProfileSpec,
    ts: f64,
    model: Option<&EngineModel<f64>>,
    settle_steps: usize,
) -> Result<ReferenceProfile> {
    if !(spec.duration > 0.0 && spec.duration.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "profile duration must be positive, got {}",
            spec.duration
        )));
    }
    if !(ts > 0.0) {
        return Err(Error::InvalidArgument(format!("sample period must be positive, got {ts}")));
    }
    let first = spec
        .steps
        .first()
        .ok_or_else(|| Error::InvalidArgument("profile needs at least one step".into()))?;
    if first.time != 0.0 {
        return Err(Error::InvalidArgument("first profile step must start at t = 0".into()));
    }
    if spec.steps.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(Error::InvalidArgument("profile step times must increase".into()));
    }
    let (lo, hi) = SPEED_ENVELOPE;
    if let Some(s) = spec.steps.iter().find(|s| !(lo..=hi).contains(&s.speed)) {
        return Err(Error::InvalidArgument(format!(
            "speed level {} rpm outside [{lo}, {hi}]",
            s.speed
        )));
    }
    let n = (spec.duration / ts).round() as usize;
    if n == 0 {
        return Err(Error::InvalidArgument("profile shorter than one sample".into()));
    }
    let level_op: Vec<f64> = match spec.op_ref {
        OpRefMode::Ceiling { level } => vec![level; spec.steps.len()],
        OpRefMode::SteadyMap => {
            let model = model.ok_or_else(|| {
                Error::InvalidArgument("steady-map opacity constraint needs an engine model".into())
            })?;
            spec.steps
                .iter()
                .map(|s| Ok(model.trim(s.speed, settle_steps)?.1.opacity[0].clamp(0.0, 100.0)))
                .collect::<Result<_>>()?
        }
    };
    let mut speed_ref = Vec::with_capacity(n);
    let mut opacity_ref = Vec::with_capacity(n);
    for k in 0..n {
        // Index arithmetic avoids accumulated time error at the step edges.
        let i = spec
            .steps
            .iter()
            .rposition(|s| (s.time / ts).round() as usize <= k)
            .expect("first step starts at zero");
        speed_ref.push(spec.steps[i].speed);
        opacity_ref.push(level_op[i]);
    }
    ReferenceProfile::new(ts, speed_ref, opacity_ref)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_shape() {
        let p = build_profile(&ProfileSpec::default(), 0.1, None, 0).unwrap();
        assert_eq!(p.len(), 600);
        assert_eq!(p.step_indices(), vec![150, 300, 450]);
        assert_eq!(p.speed_ref()[149], 1200.0);
        assert_eq!(p.speed_ref()[150], 2000.0);
        assert_eq!(p.speed_ref()[599], 1600.0);
        assert!(p.opacity_ref().iter().all(|&o| o == 15.0));
        let mask = p.transient_mask(2.0);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 3 * 41);
        assert!(mask[130] && !mask[129] && mask[170] && !mask[171]);
    }

    #[test]
    fn single_step() {
        let spec = ProfileSpec {
            steps: vec![ProfileStep { time: 0.0, speed: 1500.0 }],
            duration: 1.0,
            op_ref: OpRefMode::Ceiling { level: 10.0 },
        };
        let p = build_profile(&spec, 0.1, None, 0).unwrap();
        assert_eq!(p.len(), 10);
        assert!(p.step_indices().is_empty());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = ProfileSpec {
            duration: 0.0,
            ..ProfileSpec::default()
        };
        assert!(build_profile(&spec, 0.1, None, 0).is_err());
        spec.duration = 60.0;
        spec.steps[1].speed = 9000.0;
        assert!(build_profile(&spec, 0.1, None, 0).is_err());
        let steady = ProfileSpec {
            op_ref: OpRefMode::SteadyMap,
            ..ProfileSpec::default()
        };
        assert!(build_profile(&steady, 0.1, None, 0).is_err());
    }
}
