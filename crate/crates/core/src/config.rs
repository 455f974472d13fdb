//! Run configuration: JSON in, validated structs out.
//!
//! Every section of the config has defaults, so `{}` is a valid config and
//! describes the baseline market. Unknown fields are rejected everywhere;
//! a typo fails loudly instead of silently running the default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::AnalysisOptions;
use crate::experiments::SweepSpec;
use crate::news::NewsSpec;
use crate::params::ModelParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { field, reason: reason.into() }
    }
}

/// Everything one invocation needs: the model, its news process, where
/// output goes, what to compute from it, and optionally a sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelParams,
    pub news: NewsSpec,
    pub output_dir: PathBuf,
    pub analysis: AnalysisOptions,
    pub sweep: Option<SweepSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelParams::default(),
            news: NewsSpec::default(),
            output_dir: PathBuf::from("out"),
            analysis: AnalysisOptions::default(),
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.news.validate()?;
        self.analysis.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate(&self.model)?;
        }
        Ok(())
    }
}

/// Parse and validate a JSON config.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

/// Load, parse, and validate a JSON config file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config(&fs::read_to_string(path)?)
}

pub fn to_json(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}
