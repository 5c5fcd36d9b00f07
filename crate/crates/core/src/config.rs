//! Experiment configuration, read from a single TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::TaskConfig;
use crate::features::MODEL_INPUT_DIM;
use crate::maze::ConditionMatrix;
use crate::simulator::AgentProfile;

/// The configuration `init` writes out.
pub const DEFAULT_CONFIG: &str = include_str!("default_config.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub runs_per_cell: usize,
    pub max_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub predict: TaskConfig,
    pub reid: TaskConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub conditions: ConditionMatrix,
    pub simulation: SimulationConfig,
    pub profiles: Vec<AgentProfile>,
    pub lstm: LstmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("embedded default config is valid")
    }
}

impl ExperimentConfig {
    /// Parses and validates. Parse errors carry the line number.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(describe(text, &e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let c = &self.conditions;
        if c.small_size < 2 || c.large_size <= c.small_size {
            return bad(format!(
                "conditions: need 2 <= small_size < large_size, got {} and {}",
                c.small_size, c.large_size
            ));
        }
        if !(c.cell_size.is_finite() && c.cell_size > 0.0) {
            return bad(format!("conditions.cell_size {} must be > 0", c.cell_size));
        }
        if self.simulation.runs_per_cell < 2 {
            return bad("simulation.runs_per_cell must be at least 2 (one run is held out)".into());
        }
        if self.simulation.max_frames < 3 {
            return bad("simulation.max_frames must be at least 3".into());
        }
        if self.profiles.is_empty() {
            return bad("at least one profile is required".into());
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.validate()
                .map_err(|e| ConfigError::Invalid(format!("profiles[{i}]: {e}")))?;
            if self.profiles[..i]
                .iter()
                .any(|q| q.profile_id == p.profile_id)
            {
                return bad(format!(
                    "profiles[{i}]: duplicate profile_id `{}`",
                    p.profile_id
                ));
            }
        }
        if self.lstm.input_dim != MODEL_INPUT_DIM {
            return bad(format!(
                "lstm.input_dim must be {MODEL_INPUT_DIM}, got {}",
                self.lstm.input_dim
            ));
        }
        self.lstm
            .predict
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("lstm.predict: {e}")))?;
        self.lstm
            .reid
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("lstm.reid: {e}")))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn describe(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg.to_string(),
    }
}
