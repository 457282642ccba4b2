// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Issue,
    Plan,
    Code,
    Qa,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Issue, Stage::Plan, Stage::Code, Stage::Qa];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Issue => "issue",
            Stage::Plan => "plan",
            Stage::Code => "code",
            Stage::Qa => "qa",
        }
    }

    pub fn parse(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.as_str() == name)
    }

    /// Stages that run once per table, before any question is seen.
    pub fn is_preprocessing(self) -> bool {
        self != Stage::Qa
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decoding and retry settings for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: Stage,
    pub max_output_tokens: u32,
    pub temperature: f64,
    /// Total attempts, including the first.
    pub retries: u32,
    /// Sleep before the second attempt, in seconds; doubles afterwards.
    pub initial_delay: f64,
}

impl StageConfig {
    pub fn default_for(stage: Stage) -> Self {
        let max_output_tokens = match stage {
            Stage::Issue => 8000,
            Stage::Plan => 6000,
            Stage::Code => 1024,
            Stage::Qa => 4096,
        };
        StageConfig { stage, max_output_tokens, temperature: 0.2, retries: 10, initial_delay: 2.0 }
    }
}

/// Optional per-field overrides, as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageOverride {
    pub max_output_tokens: Option<u32>,
    pub temperature: Option<f64>,
    pub retries: Option<u32>,
    pub initial_delay: Option<f64>,
}

/// Config file shape. Top-level fields apply to every stage; a table per
/// stage name overrides them for that stage.
///
/// ```toml
/// retries = 5
/// [plan]
/// max_output_tokens = 4000
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub max_output_tokens: Option<u32>,
    pub temperature: Option<f64>,
    pub retries: Option<u32>,
    pub initial_delay: Option<f64>,
    pub issue: Option<StageOverride>,
    pub plan: Option<StageOverride>,
    pub code: Option<StageOverride>,
    pub qa: Option<StageOverride>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {stage}.{field}: {message}")]
    Value { stage: Stage, field: &'static str, message: String },
}

/// The four stage configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfigs {
    pub issue: StageConfig,
    pub plan: StageConfig,
    pub code: StageConfig,
    pub qa: StageConfig,
}

impl Default for StageConfigs {
    fn default() -> Self {
        StageConfigs {
            issue: StageConfig::default_for(Stage::Issue),
            plan: StageConfig::default_for(Stage::Plan),
            code: StageConfig::default_for(Stage::Code),
            qa: StageConfig::default_for(Stage::Qa),
        }
    }
}

fn apply(cfg: &mut StageConfig, o: &StageOverride) {
    if let Some(v) = o.max_output_tokens {
        cfg.max_output_tokens = v;
    }
    if let Some(v) = o.temperature {
        cfg.temperature = v;
    }
    if let Some(v) = o.retries {
        cfg.retries = v;
    }
    if let Some(v) = o.initial_delay {
        cfg.initial_delay = v;
    }
}

impl StageConfigs {
    pub fn get(&self, stage: Stage) -> &StageConfig {
        match stage {
            Stage::Issue => &self.issue,
            Stage::Plan => &self.plan,
            Stage::Code => &self.code,
            Stage::Qa => &self.qa,
        }
    }

    pub fn get_mut(&mut self, stage: Stage) -> &mut StageConfig {
        match stage {
            Stage::Issue => &mut self.issue,
            Stage::Plan => &mut self.plan,
            Stage::Code => &mut self.code,
            Stage::Qa => &mut self.qa,
        }
    }

    pub fn with_overrides(mut self, file: &ConfigFile) -> Result<Self, ConfigError> {
        let all = StageOverride {
            max_output_tokens: file.max_output_tokens,
            temperature: file.temperature,
            retries: file.retries,
            initial_delay: file.initial_delay,
        };
        for stage in Stage::ALL {
            let specific = match stage {
                Stage::Issue => &file.issue,
                Stage::Plan => &file.plan,
                Stage::Code => &file.code,
                Stage::Qa => &file.qa,
            };
            let cfg = self.get_mut(stage);
            apply(cfg, &all);
            if let Some(o) = specific {
                apply(cfg, o);
            }
            validate(cfg)?;
        }
        Ok(self)
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse_overrides(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
        };
        StageConfigs::default().with_overrides(&file)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse_overrides(&text)
    }
}

fn validate(cfg: &StageConfig) -> Result<(), ConfigError> {
    let bad = |field, message: &str| ConfigError::Value { stage: cfg.stage, field, message: message.to_string() };
    if cfg.retries == 0 {
        return Err(bad("retries", "must be at least 1"));
    }
    if !(cfg.initial_delay.is_finite() && cfg.initial_delay >= 0.0) {
        return Err(bad("initial_delay", "must be a non-negative number of seconds"));
    }
    if !(cfg.temperature.is_finite() && cfg.temperature >= 0.0) {
        return Err(bad("temperature", "must be non-negative"));
    }
    if cfg.max_output_tokens == 0 {
        return Err(bad("max_output_tokens", "must be positive"));
    }
    Ok(())
}
