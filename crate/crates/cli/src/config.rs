use std::path::{Path, PathBuf};

use erw_core::env::Form;
use erw_core::regen::{RunParams, DEFAULT_GUARD, DEFAULT_RESAMPLES};
use erw_core::{Construction, CookieEnvironment, CouplingKernel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    #[default]
    Path,
    Joint,
    Dominance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub mode: OracleMode,
    /// Report `P(the walk reaches this level within the horizon)`.
    #[serde(default)]
    pub hit: Option<i64>,
    /// Include every atom of the exact law in the output.
    #[serde(default)]
    pub dump: bool,
}

/// Everything that determines a run. Flags override the matching fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub env: Option<CookieEnvironment>,
    #[serde(default)]
    pub kernel: Option<Construction>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_guard")]
    pub guard: usize,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    /// Horizon of the exhaustive joint check run by `check`.
    #[serde(default = "default_exact_horizon")]
    pub exact_horizon: usize,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub grid: Vec<Vec<f64>>,
    #[serde(default = "default_grid_form")]
    pub grid_form: Form,
    /// Estimate the speed at every grid point.
    #[serde(default)]
    pub sweep_speed: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

fn default_seed() -> u64 {
    1
}
fn default_replicas() -> usize {
    1000
}
fn default_horizon() -> usize {
    1000
}
fn default_guard() -> usize {
    DEFAULT_GUARD
}
fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}
fn default_exact_horizon() -> usize {
    6
}
fn default_grid_form() -> Form {
    Form::FiniteExcitation
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl ExperimentConfig {
    /// Reads a config file, or parses the argument itself when it starts with `{`.
    pub fn load(source: &str) -> Result<Self, ConfigError> {
        let text = if source.trim_start().starts_with('{') {
            source.to_string()
        } else {
            std::fs::read_to_string(Path::new(source))
                .map_err(|e| ConfigError(format!("cannot read config {source}: {e}")))?
        };
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn env(&self) -> Result<&CookieEnvironment, ConfigError> {
        self.env
            .as_ref()
            .ok_or_else(|| ConfigError("config has no \"env\"".into()))
    }

    pub fn kernel(&self) -> Result<Option<CouplingKernel>, ConfigError> {
        match &self.kernel {
            None => Ok(None),
            Some(c) => CouplingKernel::new(self.env()?.clone(), c.clone())
                .map(Some)
                .map_err(|e| ConfigError(e.to_string())),
        }
    }

    pub fn params(&self) -> RunParams {
        RunParams::new(self.seed, self.replicas, self.horizon)
            .with_guard(self.guard)
            .with_resamples(self.resamples)
    }

    pub fn validate_run(&self) -> Result<(), ConfigError> {
        if self.replicas == 0 || self.horizon == 0 || self.guard == 0 || self.resamples == 0 {
            return Err(ConfigError(
                "replicas, horizon, guard and resamples must be positive".into(),
            ));
        }
        Ok(())
    }
}
