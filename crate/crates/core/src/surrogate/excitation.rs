use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pump-position test signals for identification runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Excitation {
    /// Ascending staircase of `levels` evenly spaced values over `[low, high]`.
    Staircase { levels: usize, low: f64, high: f64 },
    /// Random binary or amplitude-modulated pseudo-random sequence. Each
    /// segment lasts a uniform number of samples in `[min_hold, max_hold]`;
    /// binary sequences pick `low` or `high`, modulated ones a uniform level.
    Prbs {
        low: f64,
        high: f64,
        min_hold: usize,
        max_hold: usize,
        amplitude_modulated: bool,
    },
}

pub const MIN_SAMPLES: usize = 100;
pub const MIN_STAIRCASE_LEVELS: usize = 8;
pub const MIN_HOLD: usize = 5;

impl Default for Excitation {
    fn default() -> Self {
        Excitation::Prbs {
            low: 20.0,
            high: 95.0,
            min_hold: 10,
            max_hold: 60,
            amplitude_modulated: true,
        }
    }
}

impl Excitation {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |lo: f64, hi: f64| (0.0..=100.0).contains(&lo) && (0.0..=100.0).contains(&hi) && lo < hi;
        match *self {
            Excitation::Staircase { levels, low, high } => {
                if levels < MIN_STAIRCASE_LEVELS {
                    return Err(Error::InvalidArgument(format!(
                        "staircase needs at least {MIN_STAIRCASE_LEVELS} levels"
                    )));
                }
                if !range_ok(low, high) {
                    return Err(Error::InvalidArgument("staircase range must satisfy 0 <= low < high <= 100".into()));
                }
            }
            Excitation::Prbs {
                low,
                high,
                min_hold,
                max_hold,
                ..
            } => {
                if !range_ok(low, high) {
                    return Err(Error::InvalidArgument("PRBS range must satisfy 0 <= low < high <= 100".into()));
                }
                if min_hold < MIN_HOLD || max_hold < min_hold {
                    return Err(Error::InvalidArgument(format!(
                        "PRBS hold must satisfy {MIN_HOLD} <= min_hold <= max_hold"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Pump sequence of `samples` values; deterministic in `seed`.
pub fn generate_excitation(kind: &Excitation, samples: usize, seed: u64) -> Result<Vec<f64>> {
    kind.validate()?;
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "excitation needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let out = match *kind {
        Excitation::Staircase { levels, low, high } => {
            let per = samples / levels;
            (0..samples)
                .map(|i| {
                    let level = (i / per).min(levels - 1);
                    low + (high - low) * level as f64 / (levels - 1) as f64
                })
                .collect()
        }
        Excitation::Prbs {
            low,
            high,
            min_hold,
            max_hold,
            amplitude_modulated,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(samples);
            while out.len() < samples {
                let hold = rng.random_range(min_hold..=max_hold);
                let level = if amplitude_modulated {
                    rng.random_range(low..=high)
                } else if rng.random_bool(0.5) {
                    high
                } else {
                    low
                };
                let n = hold.min(samples - out.len());
                out.extend(std::iter::repeat(level).take(n));
            }
            out
        }
    };
    Ok(out)
}
