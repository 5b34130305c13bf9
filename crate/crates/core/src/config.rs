//! Experiment configuration: one TOML document with a section per stage.
//!
//! Every field has a default, unknown keys are rejected, and the resolved
//! document (defaults filled in, overrides applied) is hashed so that output
//! files can record exactly what produced them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::closed_loop::{ProfileSpec, SPEED_ENVELOPE};
use crate::control::TrainConfig;
use crate::error::{Error, Result};
use crate::surrogate::{generate_excitation, simulate_plant, Excitation, MIN_SAMPLES};
use crate::surrogate::{Channel, PlantParams, PlantState, SignalLog};
use crate::sysid::{FitConfig, IdentifyConfig, SelectConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub samples: usize,
    /// Seed of the excitation sequence; measurement noise uses `plant.noise.seed`.
    pub seed: u64,
    pub excitation: Excitation,
    /// Samples used to settle the plant at the first pump value.
    pub settle_steps: usize,
    /// Tail of the log held out for validation when no separate log is given.
    pub validation_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            samples: 3000,
            seed: 1,
            excitation: Excitation::default(),
            settle_steps: 20_000,
            validation_fraction: 0.3,
        }
    }
}

impl DataConfig {
    /// Log of the plant driven by the configured excitation, started settled.
    pub fn generate(&self, plant: &PlantParams) -> Result<SignalLog> {
        let pump = generate_excitation(&self.excitation, self.samples, self.seed)?;
        let init = PlantState::settled(plant, pump[0], self.settle_steps)?;
        simulate_plant(plant, &pump, init)
    }
}

/// Candidate grids for the two-phase structure search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectGrid {
    pub output_lags: Vec<usize>,
    pub input_lags: Vec<usize>,
    pub nodes: Vec<usize>,
    pub phase1_hidden: usize,
    pub fit: FitConfig,
}

impl Default for SelectGrid {
    fn default() -> Self {
        let s = SelectConfig::default();
        Self {
            output_lags: (1..=4).collect(),
            input_lags: (1..=4).collect(),
            nodes: (2..=12).collect(),
            phase1_hidden: s.phase1_hidden,
            fit: s.fit,
        }
    }
}

impl SelectGrid {
    pub fn select_config(&self) -> SelectConfig {
        SelectConfig {
            phase1_hidden: self.phase1_hidden,
            fit: self.fit.clone(),
        }
    }
}

/// Controller sweep and closed-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub eta_op: Vec<f64>,
    /// Samples used to settle the model at the first reference speed.
    pub settle_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eta_op: vec![0.0, 0.2, 0.8],
            settle_steps: 1000,
        }
    }
}

/// Default artefact locations, relative to the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub log: PathBuf,
    pub model: PathBuf,
    pub controllers: PathBuf,
    pub runs: PathBuf,
    pub report: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            log: "out/log.csv".into(),
            model: "out/model".into(),
            controllers: "out/controllers".into(),
            runs: "out/runs".into(),
            report: "out/summary.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantParams,
    pub data: DataConfig,
    pub identify: IdentifyConfig,
    pub select: SelectGrid,
    pub train: TrainConfig,
    pub profile: ProfileSpec,
    pub experiment: ExperimentConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The resolved document with every field spelled out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the resolved document, lower-case hex.
    pub fn digest(&self) -> Result<String> {
        let hash = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Comment lines embedded at the top of every output file.
    pub fn provenance(&self, command: &str) -> Result<Vec<String>> {
        Ok(vec![
            format!("dieselnn {} {command}", env!("CARGO_PKG_VERSION")),
            format!("config-sha256 {}", self.digest()?),
            format!(
                "seeds data={} noise={} identify={} select={} controller={}",
                self.data.seed, self.plant.noise.seed, self.identify.fit.lm.seed, self.select.fit.lm.seed, self.train.seed
            ),
        ])
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, e: Error| Error::Config(format!("[{section}] {e}"));
        self.plant.validate().map_err(|e| wrap("plant", e))?;
        self.data.excitation.validate().map_err(|e| wrap("data", e))?;
        if self.data.samples < MIN_SAMPLES {
            return Err(Error::Config(format!("[data] samples must be at least {MIN_SAMPLES}")));
        }
        if !(self.data.validation_fraction > 0.0 && self.data.validation_fraction < 1.0) {
            return Err(Error::Config("[data] validation_fraction must lie in (0, 1)".into()));
        }
        for ch in [Channel::Speed, Channel::Pressure, Channel::Airflow, Channel::Opacity] {
            let (spec, hidden) = self.identify.slot(ch).expect("modelled channel");
            spec.validate(ch).map_err(|e| wrap("identify", e))?;
            if hidden == 0 {
                return Err(Error::Config(format!("[identify] {ch} needs at least one hidden node")));
            }
        }
        self.identify.fit.lm.validate().map_err(|e| wrap("identify", e))?;
        let g = &self.select;
        if g.output_lags.is_empty() || g.input_lags.is_empty() || g.nodes.is_empty() {
            return Err(Error::Config("[select] grids must be non-empty".into()));
        }
        if g.output_lags.contains(&0) || g.input_lags.contains(&0) || g.nodes.contains(&0) || g.phase1_hidden == 0 {
            return Err(Error::Config("[select] lags and node counts must be positive".into()));
        }
        g.fit.lm.validate().map_err(|e| wrap("select", e))?;
        self.train.validate().map_err(|e| wrap("train", e))?;
        let e = &self.experiment;
        if e.eta_op.is_empty() {
            return Err(Error::Config("[experiment] eta_op needs at least one value".into()));
        }
        if e.eta_op.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("[experiment] eta_op values must be finite and non-negative".into()));
        }
        let (lo, hi) = SPEED_ENVELOPE;
        if self.profile.steps.iter().any(|s| !(lo..=hi).contains(&s.speed)) {
            return Err(Error::Config(format!("[profile] speeds must lie in [{lo}, {hi}] rpm")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn resolved_document_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml("[train]\nepochz = 3\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("colour = 1\n"), Err(Error::Config(_))));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        b.train.seed = 2;
        assert_ne!(a.digest().unwrap(), b.digest().unwrap());
        assert_eq!(a.digest().unwrap().len(), 64);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[experiment]\neta_op = []\n").is_err());
        assert!(RunConfig::from_toml("[experiment]\neta_op = [-0.1]\n").is_err());
        assert!(RunConfig::from_toml("[train]\ndelta = 0.0\n").is_err());
        assert!(RunConfig::from_toml("[data]\nsamples = 10\n").is_err());
        assert!(RunConfig::from_toml("[select]\nnodes = []\n").is_err());
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            "[train]\nopacity_error = \"symmetric\"\nhidden = 3\n\n[profile.op_ref]\nmode = \"steady-map\"\n\n\
             [data.excitation]\nkind = \"staircase\"\nlevels = 9\nlow = 10.0\nhigh = 90.0\n",
        )
        .unwrap();
        assert_eq!(cfg.train.hidden, 3);
        assert_eq!(cfg.train.opacity_error, crate::control::OpacityError::Symmetric);
        assert!(matches!(cfg.data.excitation, Excitation::Staircase { levels: 9, .. }));
    }
}
