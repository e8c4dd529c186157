//! Scenario grid files (TOML syntax) and the shipped presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Design, Scenario};
use crate::bayes::rscale;

const SIM1: &str = include_str!("../../presets/sim1.cfg");
const SIM2: &str = include_str!("../../presets/sim2.cfg");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub k: usize,
    pub beta: Vec<f64>,
    pub sigma_sq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    /// Replicate count used by `--full`.
    #[serde(default)]
    pub full_replicates: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub n_obs: Vec<usize>,
    pub delta_grid: Vec<f64>,
    #[serde(default)]
    pub boundary_delta: bool,
    #[serde(default)]
    pub bf_thresholds: Vec<f64>,
    #[serde(default = "default_rscale")]
    pub rscale: String,
    pub designs: Vec<DesignSpec>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_rscale() -> String {
    "medium".to_string()
}

/// Text of a shipped preset (`sim1` or `sim2`).
pub fn preset(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".cfg") {
        "sim1" => Some(SIM1),
        "sim2" => Some(SIM2),
        _ => None,
    }
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let config: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.scenarios(None)?;
    Ok(config)
}

/// Reads a config file; a bare preset name (`sim1`, `sim2.cfg`) that does
/// not exist on disk resolves to the built-in preset.
pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_config(&text),
        Err(source) => {
            let builtin = path
                .to_str()
                .filter(|p| !p.contains(std::path::MAIN_SEPARATOR))
                .and_then(preset);
            match builtin {
                Some(text) => parse_config(text),
                None => Err(ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                }),
            }
        }
    }
}

impl SimConfig {
    pub fn rscale_value(&self) -> Result<f64, ConfigError> {
        rscale::parse(&self.rscale)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown rscale {:?}", self.rscale)))
    }

    /// Expands the grid in file order: design, then σ², then N. Scenario `i`
    /// is seeded with `seed + i`.
    pub fn scenarios(&self, replicates: Option<usize>) -> Result<Vec<Scenario>, ConfigError> {
        let rscale = self.rscale_value()?;
        let replicates = replicates.unwrap_or(self.replicates);
        if self.designs.is_empty() || self.n_obs.is_empty() {
            return Err(ConfigError::Invalid("need at least one design and one N".into()));
        }
        let mut out = Vec::new();
        for design in &self.designs {
            if design.sigma_sq.is_empty() {
                return Err(ConfigError::Invalid("design without sigma_sq values".into()));
            }
            for &sigma_sq in &design.sigma_sq {
                for &n_obs in &self.n_obs {
                    let scenario = Scenario {
                        n_obs,
                        design: Design::BinaryOrthogonalBalanced { k: design.k },
                        beta: design.beta.clone(),
                        sigma_sq,
                        delta_grid: self.delta_grid.clone(),
                        boundary_delta: self.boundary_delta,
                        alpha: self.alpha,
                        bf_thresholds: self.bf_thresholds.clone(),
                        rscale,
                        replicates,
                        seed: self.seed.wrapping_add(out.len() as u64),
                    };
                    scenario
                        .validate()
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    out.push(scenario);
                }
            }
        }
        Ok(out)
    }
}
