//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::baselines::{AuctionParams, EmotionParams};
use crate::coordinator::SimConfig;
use crate::error::{Error, Result};
use crate::rl::DqnConfig;
use crate::world::AgentAttributes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Dqn,
    Auction,
    Emotion,
    Nocoop,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [Self::Dqn, Self::Auction, Self::Emotion, Self::Nocoop, Self::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dqn => "dqn",
            Self::Auction => "auction",
            Self::Emotion => "emotion",
            Self::Nocoop => "nocoop",
            Self::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidConfiguration(format!("unknown policy {s:?}; expected one of dqn, auction, emotion, nocoop, random")))
    }
}

/// Randomly generated terrain, or the cell size of a loaded grid file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainConfig {
    pub width: usize,
    pub height: usize,
    /// Metres per cell.
    pub cell_size: f64,
    pub obstacle_density: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            width: 50,
            height: 50,
            cell_size: 0.5,
            obstacle_density: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Number of agents `m`.
    pub agents: usize,
    /// Grid file; when absent every episode gets a fresh random world.
    pub world: Option<PathBuf>,
    pub terrain: TerrainConfig,
    pub sigma1: f64,
    pub policies: Vec<PolicyKind>,
    pub train_episodes: usize,
    pub eval_episodes: usize,
    pub ticks: u64,
    /// Exploration rate of the trained policy during evaluation.
    pub eval_epsilon: f64,
    pub output: PathBuf,
    pub plots: bool,
    /// Mean agent attributes.
    pub attributes: AgentAttributes,
    pub sim: SimConfig,
    pub dqn: DqnConfig,
    pub auction: AuctionParams,
    pub emotion: EmotionParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            agents: 4,
            world: None,
            terrain: TerrainConfig::default(),
            sigma1: 0.2,
            policies: PolicyKind::ALL.to_vec(),
            train_episodes: 150,
            eval_episodes: 30,
            ticks: 300,
            eval_epsilon: 0.0,
            output: PathBuf::from("out"),
            plots: true,
            attributes: AgentAttributes::default(),
            sim: SimConfig::default(),
            dqn: DqnConfig::default(),
            auction: AuctionParams::default(),
            emotion: EmotionParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfiguration(e.to_string()))
    }

    /// Read and validate a config file. A relative `world` path is resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfiguration(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(world), Some(dir)) = (&cfg.world, path.parent()) {
            if world.is_relative() {
                cfg.world = Some(dir.join(world));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfiguration(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfiguration(msg));
        if self.agents < 2 {
            return bad(format!("agents must be at least 2, got {}", self.agents));
        }
        if !(self.sigma1 >= 0.0 && self.sigma1.is_finite()) {
            return bad(format!("sigma1 must be a finite value >= 0, got {}", self.sigma1));
        }
        if self.policies.is_empty() {
            return bad("policies must not be empty".into());
        }
        let mut sorted = self.policies.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.policies.len() {
            return bad("policies contains duplicates".into());
        }
        if self.eval_episodes == 0 || self.ticks == 0 {
            return bad("eval_episodes and ticks must be positive".into());
        }
        if self.policies.contains(&PolicyKind::Dqn) && self.train_episodes == 0 {
            return bad("train_episodes must be positive when the dqn policy is evaluated without a checkpoint".into());
        }
        if !(0.0..=1.0).contains(&self.eval_epsilon) {
            return bad(format!("eval_epsilon must lie in [0, 1], got {}", self.eval_epsilon));
        }
        if !(self.terrain.cell_size > 0.0) {
            return bad(format!("terrain.cell_size must be > 0, got {}", self.terrain.cell_size));
        }
        if let Some(world) = &self.world {
            if !world.is_file() {
                return bad(format!("world file {} does not exist", world.display()));
            }
        }
        self.attributes.validate()?;
        self.sim.validate()?;
        self.dqn.validate()?;
        if !(self.auction.threshold >= 0.0 && self.auction.loss_weight >= 0.0) {
            return bad("auction parameters must be non-negative".into());
        }
        if !((0.0..=1.0).contains(&self.emotion.empathy_decay) && self.emotion.threshold >= 0.0) {
            return bad("emotion decay must lie in [0, 1] and threshold be non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 9\npolicies = [\"nocoop\"]\n[sim]\nmu = 0.5\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.policies, vec![PolicyKind::Nocoop]);
        assert_eq!(cfg.sim.mu, 0.5);
        assert_eq!(cfg.sim.dt, 0.5);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("policies = [\"greedy\"]").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        let cfg = ExperimentConfig::from_toml("[sim]\ndt = 0.0").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::from_toml("world = \"/nonexistent/grid.txt\"").unwrap();
        assert!(cfg.validate().is_err());
    }
}
