//! Run configuration loaded from TOML. Every field has a default, so an
//! empty file gives the reference settings; partial tables override only
//! the keys they name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchConfig, TimingModel};
use crate::contact::{FrictionModel, FRICTIONLESS_MU};
use crate::error::{GraspError, Result};
use crate::mlp::TrainParams;
use crate::mognet::CollectConfig;
use crate::planning::{PlannerSettings, N_G_MAX};
use crate::scene::SceneSpec;
use crate::sim::SimParams;

/// Data collection section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSection {
    pub samples: usize,
    /// Smallest group size used for data collection.
    pub min_group_size: usize,
    pub attempt_factor: usize,
}

impl Default for CollectSection {
    fn default() -> Self {
        let c = CollectConfig::default();
        CollectSection {
            samples: c.samples,
            min_group_size: c.min_group_size,
            attempt_factor: c.attempt_factor,
        }
    }
}

/// Feature scaling and evaluation split of the grasp-count model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Vertex coordinates are divided by this before entering the network.
    pub input_scale: f64,
    /// Fraction of the dataset held out for reporting accuracy.
    pub holdout_fraction: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            input_scale: 85.0,
            holdout_fraction: 0.2,
        }
    }
}

/// Decluttering section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub frictionless_mu: f64,
    pub attempt_factor: usize,
    pub motion_time: f64,
    pub timing: TimingModel,
}

impl Default for BenchSection {
    fn default() -> Self {
        let b = BenchConfig::default();
        BenchSection {
            frictionless_mu: FRICTIONLESS_MU,
            attempt_factor: b.attempt_factor,
            motion_time: b.motion_time,
            timing: b.timing,
        }
    }
}

/// All tunables of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root seed; subcommands derive every other seed from it.
    pub seed: u64,
    pub scene: SceneSpec,
    pub planner: PlannerSettings,
    pub sim: SimParams,
    pub collect: CollectSection,
    pub model: ModelSection,
    pub train: TrainParams,
    pub bench: BenchSection,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| GraspError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.collect_config().scene.validate()?;
        self.planner.validate()?;
        self.sim.validate()?;
        self.train.validate()?;
        self.bench_config().validate()?;
        let c = &self.collect;
        if c.samples == 0 || c.attempt_factor == 0 || self.bench.attempt_factor == 0 {
            return Err(GraspError::Config("sample and attempt counts must be positive".into()));
        }
        if !(1..=N_G_MAX).contains(&c.min_group_size) {
            return Err(GraspError::Config(format!(
                "min_group_size {} outside 1..={N_G_MAX}",
                c.min_group_size
            )));
        }
        let m = &self.model;
        if !(m.input_scale.is_finite() && m.input_scale > 0.0) {
            return Err(GraspError::Config(format!("input_scale {} must be positive", m.input_scale)));
        }
        if !(m.holdout_fraction > 0.0 && m.holdout_fraction < 1.0) {
            return Err(GraspError::Config(format!(
                "holdout_fraction {} outside (0, 1)",
                m.holdout_fraction
            )));
        }
        FrictionModel::new(self.bench.frictionless_mu)?;
        Ok(())
    }

    /// Replace the planner friction coefficient.
    pub fn with_mu(mut self, mu: f64) -> Result<Config> {
        self.planner.friction = FrictionModel::new(mu)?;
        Ok(self)
    }

    pub fn collect_config(&self) -> CollectConfig {
        CollectConfig {
            scene: self.scene,
            samples: self.collect.samples,
            min_group_size: self.collect.min_group_size,
            attempt_factor: self.collect.attempt_factor,
            planner: self.planner,
            sim: self.sim,
        }
    }

    pub fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            scene: self.scene,
            planner: self.planner,
            frictionless_mu: self.bench.frictionless_mu,
            sim: self.sim,
            attempt_factor: self.bench.attempt_factor,
            motion_time: self.bench.motion_time,
            timing: self.bench.timing,
        }
    }

    /// Training parameters with the seed replaced.
    pub fn train_params(&self, seed: u64) -> TrainParams {
        TrainParams {
            seed,
            ..self.train.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planning::{DEFAULT_N_P, DEFAULT_N_THETA};

    #[test]
    fn empty_file_gives_reference_values() {
        let cfg = Config::from_toml_str("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.planner.n_p, DEFAULT_N_P);
        assert_eq!(cfg.planner.n_theta, DEFAULT_N_THETA);
        assert_eq!(cfg.planner.friction.mu(), 0.5);
    }

    #[test]
    fn partial_override_and_round_trip() {
        let cfg = Config::from_toml_str("seed = 7\n[planner]\nn_theta = 6\n[planner.noise]\nn_mc = 10\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.planner.n_theta, 6);
        assert_eq!(cfg.planner.noise.n_mc, 10);
        assert_eq!(cfg.planner.n_p, DEFAULT_N_P);
        let text = cfg.to_toml();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            "[planner]\nfriction = 3.0",
            "[planner]\nn_p = 0",
            "[sim]\ntau_contain = 1.5",
            "[collect]\nmin_group_size = 5",
            "[model]\nholdout_fraction = 1.0",
            "[planner]\nunknown = 1",
        ] {
            let err = Config::from_toml_str(bad).unwrap_err();
            assert_eq!(err.kind(), "config", "{bad}");
        }
    }
}
