//! Run configuration files.
//!
//! A configuration is one JSON object. Regime indices in configuration
//! files are 1-based.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, RegimeModel};
use crate::presets;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub name: String,
    pub model: ModelSpec,
    /// 1-based regime in force before the first step.
    #[serde(default = "one")]
    pub start_regime: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    Killed,
    Absorbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub seed: u64,
    pub n_steps: usize,
    pub replicates: usize,
    /// 1-based.
    pub start_regime: usize,
    pub start_site: i64,
    pub target: i64,
    /// Solver window; defaults to a symmetric window around the target.
    pub window: Option<(i64, i64)>,
    pub boundary_mode: ModeConfig,
    /// Steps for iterative spectra and Birkhoff averages.
    pub spectrum_steps: usize,
    /// Realization window for environments that cannot be regenerated.
    pub env_window: (i64, i64),
    pub gamma_tol: f64,
    pub estimate_gamma: bool,
    /// `(p1, p2)` for the Game B ratio.
    pub mu_p: (f64, f64),
    /// Grid size for the Game D ratio curve; 0 disables it.
    pub mu_curve_points: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            seed: 42,
            n_steps: 10_000,
            replicates: 200,
            start_regime: 1,
            start_site: 100,
            target: 0,
            window: None,
            boundary_mode: ModeConfig::Killed,
            spectrum_steps: crate::spectral::DEFAULT_STEPS,
            env_window: (-100_000, 100_000),
            gamma_tol: 0.02,
            estimate_gamma: false,
            mu_p: (0.099, 0.749),
            mu_curve_points: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    /// The model for single-model commands.
    pub model: ModelSpec,
    /// Extra games for fortune experiments; empty means the model alone.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub games: Vec<GameConfig>,
    #[serde(default)]
    pub params: Params,
    /// Default output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn preset(name: &str) -> Result<Self> {
        presets::get(name)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let model = RegimeModel::from_spec(&self.model).map_err(cfg_err)?;
        let p = &self.params;
        if p.start_regime == 0 || p.start_regime > model.m() {
            return Err(Error::Config(format!("start_regime {} outside 1..={}", p.start_regime, model.m())));
        }
        for g in &self.games {
            let gm = RegimeModel::from_spec(&g.model).map_err(cfg_err)?;
            if g.start_regime == 0 || g.start_regime > gm.m() {
                return Err(Error::Config(format!("game {}: start_regime outside 1..={}", g.name, gm.m())));
            }
        }
        if let Some((a, b)) = p.window {
            if !(a < p.target && p.target < b) {
                return Err(Error::Config("window must contain the target with margin".into()));
            }
        }
        if p.env_window.0 > p.env_window.1 {
            return Err(Error::Config("env_window is empty".into()));
        }
        if p.spectrum_steps == 0 {
            return Err(Error::Config("spectrum_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn regime_model(&self) -> Result<RegimeModel> {
        RegimeModel::from_spec(&self.model)
    }

    /// The games of a fortune experiment.
    pub fn fortune_games(&self) -> Vec<GameConfig> {
        if self.games.is_empty() {
            vec![GameConfig { name: self.name.clone(), model: self.model.clone(), start_regime: self.params.start_regime }]
        } else {
            self.games.clone()
        }
    }
}
