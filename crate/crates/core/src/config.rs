//! The single JSON config file shared by every command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Result};
use crate::mapping::MapConfig;
use crate::metrics::MetricsConfig;
use crate::robot::{RobotParams, Terrain};
use crate::sim::SimConfig;
use crate::strategy::CompareConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Every numeric parameter of the toolkit. Missing sections take their
/// defaults; unknown keys are rejected so typos surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub robot: RobotParams,
    pub sim: SimConfig,
    pub metrics: MetricsConfig,
    pub map: MapConfig,
    pub compare: CompareConfig,
    /// Terrains beyond the built-in presets, looked up by id first.
    pub terrains: Vec<Terrain>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            robot: RobotParams::default(),
            sim: SimConfig::default(),
            metrics: MetricsConfig::default(),
            map: MapConfig::default(),
            compare: CompareConfig::default(),
            terrains: Vec::new(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| invalid_config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid_config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(invalid_config(format!(
                "config version {} not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.robot.validate()?;
        self.sim.validate()?;
        self.metrics.weights.validate()?;
        self.map.validate()?;
        self.compare.validate()?;
        for t in &self.terrains {
            t.validate()?;
        }
        Ok(())
    }

    pub fn terrain(&self, id: &str) -> Result<Terrain> {
        match self.terrains.iter().find(|t| t.id == id) {
            Some(t) => Ok(t.clone()),
            None => Terrain::preset(id).map_err(|e| invalid_config(e.to_string())),
        }
    }

    /// Applies a seed override to every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.sim.seed = seed;
        self.compare.seed = seed;
    }
}
