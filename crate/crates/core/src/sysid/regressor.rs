use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::surrogate::{Channel, SignalLog};

/// Lagged copies of one exogenous channel: `u(k - delay), ..., u(k - delay - lags + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputLags {
    pub channel: Channel,
    pub delay: usize,
    pub lags: usize,
}

impl InputLags {
    pub fn new(channel: Channel, delay: usize, lags: usize) -> Self {
        Self {
            channel,
            delay,
            lags,
        }
    }
}

/// Lag structure of one MISO output-error sub-model.
///
/// The regressor at time `k` is
/// `[ŷ(k-1) .. ŷ(k-output_lags), u_1(k-d_1) .. u_1(k-d_1-n_1+1), ...]`,
/// with past *simulated* outputs, never measured ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorSpec {
    pub output_lags: usize,
    pub inputs: Vec<InputLags>,
}

impl RegressorSpec {
    pub fn new(output_lags: usize, inputs: Vec<InputLags>) -> Self {
        Self {
            output_lags,
            inputs,
        }
    }

    /// `R̂(k) = f(R̂(k-1), R̂(k-2), T(k-1))`.
    pub fn speed_default() -> Self {
        Self::new(2, vec![InputLags::new(Channel::PumpPosition, 1, 1)])
    }

    /// `P̂(k) = f(P̂(k-1), R̂(k-1))`.
    pub fn pressure_default() -> Self {
        Self::new(1, vec![InputLags::new(Channel::Speed, 1, 1)])
    }

    /// `ṁ(k) = f(ṁ(k-1), P̂(k-1), R̂(k-1))`.
    pub fn airflow_default() -> Self {
        Self::new(
            1,
            vec![
                InputLags::new(Channel::Pressure, 1, 1),
                InputLags::new(Channel::Speed, 1, 1),
            ],
        )
    }

    /// `Ôp(k) = f(Ôp(k-1), T(k-d), R̂(k-d), ṁ(k-d))`.
    pub fn opacity_default(delay: usize) -> Self {
        Self::new(
            1,
            vec![
                InputLags::new(Channel::PumpPosition, delay, 1),
                InputLags::new(Channel::Speed, delay, 1),
                InputLags::new(Channel::Airflow, delay, 1),
            ],
        )
    }

    /// Same structure with `output_lags` and every input's lag count replaced.
    pub fn with_orders(&self, output_lags: usize, input_lags: usize) -> Self {
        Self {
            output_lags,
            inputs: self
                .inputs
                .iter()
                .map(|i| InputLags {
                    lags: input_lags,
                    ..*i
                })
                .collect(),
        }
    }

    pub fn n_regressors(&self) -> usize {
        self.output_lags + self.inputs.iter().map(|i| i.lags).sum::<usize>()
    }

    /// Oldest sample index offset needed; the first simulated index.
    pub fn max_lag(&self) -> usize {
        self.inputs
            .iter()
            .filter(|i| i.lags > 0)
            .map(|i| i.delay + i.lags - 1)
            .chain(std::iter::once(self.output_lags))
            .max()
            .unwrap_or(0)
    }

    /// Position of `channel(k - lag)` in the regressor vector, if present.
    pub fn input_position(&self, channel: Channel, lag: usize) -> Option<usize> {
        let mut pos = self.output_lags;
        for i in &self.inputs {
            if i.channel == channel && lag >= i.delay && lag < i.delay + i.lags {
                return Some(pos + lag - i.delay);
            }
            pos += i.lags;
        }
        None
    }

    pub fn validate(&self, output: Channel) -> Result<()> {
        if self.n_regressors() == 0 {
            return Err(Error::InvalidArgument("regressor set is empty".into()));
        }
        if !self.inputs.iter().any(|i| i.lags > 0) {
            return Err(Error::InvalidArgument(
                "output-error model needs at least one exogenous regressor".into(),
            ));
        }
        for (n, i) in self.inputs.iter().enumerate() {
            if i.channel == output {
                return Err(Error::InvalidArgument(format!(
                    "input {n} repeats the output channel {output}"
                )));
            }
            if self.inputs[..n].iter().any(|j| j.channel == i.channel) {
                return Err(Error::InvalidArgument(format!(
                    "channel {} listed twice",
                    i.channel
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for RegressorSpec {
    /// Compact label, e.g. `y2 T1@1`: two output lags, one lag of `T` from delay 1.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y{}", self.output_lags)?;
        for i in &self.inputs {
            write!(f, " {}{}@{}", i.channel, i.lags, i.delay)?;
        }
        Ok(())
    }
}

/// Affine map to zero mean / unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine<S> {
    pub mean: S,
    pub scale: S,
}

impl<S: Scalar> Affine<S> {
    pub fn identity() -> Self {
        Self {
            mean: S::zero(),
            scale: S::one(),
        }
    }

    pub fn new(mean: S, scale: S) -> Result<Self> {
        if !(scale > S::zero() && scale.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "normalisation scale must be positive and finite (mean {mean}, scale {scale})"
            )));
        }
        Ok(Self { mean, scale })
    }

    /// Sample mean and standard deviation; constant data gets unit scale.
    pub fn fit(data: &[f64]) -> Self {
        let n = data.len().max(1) as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
        Self {
            mean: S::of(mean),
            scale: S::of(scale),
        }
    }

    #[inline]
    pub fn normalize(&self, x: S) -> S {
        (x - self.mean) / self.scale
    }

    #[inline]
    pub fn denormalize(&self, z: S) -> S {
        self.mean + self.scale * z
    }

    pub fn cast<T: Scalar>(&self) -> Affine<T> {
        Affine {
            mean: T::of(self.mean.as_f64()),
            scale: T::of(self.scale.as_f64()),
        }
    }
}

/// Named signal columns in a chosen scalar type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelData<S> {
    data: BTreeMap<Channel, Vec<S>>,
}

impl<S: Scalar> ChannelData<S> {
    pub fn new() -> Self {
        Self {
            data: BTreeMap::new(),
        }
    }

    pub fn from_log(log: &SignalLog) -> Self {
        let mut out = Self::new();
        for ch in Channel::ALL {
            out.insert(ch, log.channel(ch).into_iter().map(S::of).collect());
        }
        out
    }

    pub fn insert(&mut self, ch: Channel, values: Vec<S>) {
        self.data.insert(ch, values);
    }

    pub fn with(mut self, ch: Channel, values: Vec<S>) -> Self {
        self.insert(ch, values);
        self
    }

    pub fn get(&self, ch: Channel) -> Result<&[S]> {
        self.data
            .get(&ch)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("missing channel {ch}")))
    }

    pub fn get_mut(&mut self, ch: Channel) -> Option<&mut Vec<S>> {
        self.data.get_mut(&ch)
    }

    pub fn remove(&mut self, ch: Channel) -> Option<Vec<S>> {
        self.data.remove(&ch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_structures() {
        let s = RegressorSpec::speed_default();
        assert_eq!(s.n_regressors(), 3);
        assert_eq!(s.max_lag(), 2);
        let o = RegressorSpec::opacity_default(4);
        assert_eq!(o.n_regressors(), 4);
        assert_eq!(o.max_lag(), 4);
        assert_eq!(o.input_position(Channel::PumpPosition, 4), Some(1));
        assert_eq!(o.input_position(Channel::Airflow, 4), Some(3));
        assert_eq!(o.input_position(Channel::PumpPosition, 3), None);
        assert_eq!(s.to_string(), "y2 T1@1");
    }

    #[test]
    fn with_orders_changes_every_input() {
        let s = RegressorSpec::airflow_default().with_orders(3, 2);
        assert_eq!(s.output_lags, 3);
        assert!(s.inputs.iter().all(|i| i.lags == 2 && i.delay == 1));
        assert_eq!(s.max_lag(), 3);
        assert_eq!(s.n_regressors(), 7);
    }

    #[test]
    fn validation() {
        assert!(RegressorSpec::new(0, vec![]).validate(Channel::Speed).is_err());
        assert!(RegressorSpec::new(2, vec![])
            .validate(Channel::Speed)
            .is_err());
        let own = RegressorSpec::new(1, vec![InputLags::new(Channel::Speed, 1, 1)]);
        assert!(own.validate(Channel::Speed).is_err());
        assert!(RegressorSpec::speed_default().validate(Channel::Speed).is_ok());
    }

    #[test]
    fn affine_round_trip() {
        let a = Affine::<f64>::fit(&[1200.0, 1800.0, 2600.0, 900.0]);
        for &y in &[0.0, 1234.5678, -77.0, 5e3] {
            assert!((a.denormalize(a.normalize(y)) - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        let c = Affine::<f64>::fit(&[3.0, 3.0, 3.0]);
        assert_eq!(c.scale, 1.0);
        assert!(Affine::new(0.0, 0.0).is_err());
    }
}
