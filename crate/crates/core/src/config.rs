//! Simulation configuration and its TOML file form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::scheduler::Action;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngagementWeights {
    pub post: f64,
    pub share_link: f64,
    pub comment: f64,
    pub read: f64,
    pub search: f64,
}

impl Default for EngagementWeights {
    fn default() -> Self {
        Self {
            post: 0.005,
            share_link: 0.06,
            comment: 0.06,
            read: 0.40,
            search: 0.10,
        }
    }
}

impl EngagementWeights {
    pub fn weight(&self, action: Action) -> f64 {
        match action {
            Action::Post => self.post,
            Action::ShareLink => self.share_link,
            Action::Comment => self.comment,
            Action::Read => self.read,
            Action::Search => self.search,
            Action::None => 0.0,
        }
    }

    /// Weights in [`Action::PRIMITIVES`] order.
    pub fn as_array(&self) -> [f64; 5] {
        Action::PRIMITIVES.map(|a| self.weight(a))
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub mode: GeneratorMode,
    pub url: Option<String>,
    pub model: String,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            mode: GeneratorMode::Stub,
            url: None,
            model: "dolphin3".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub days: u32,
    pub starting_agents: u32,
    pub growth_rate: f64,
    pub churn_rate: f64,
    pub engagement_weights: EngagementWeights,
    pub activation_prob_per_round: f64,
    /// Optional relative activation weight for each hour of the day. Absent
    /// means flat.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hourly_activity: Option<Vec<f64>>,
    pub visibility_window_rounds: u32,
    pub thread_read_depth: usize,
    pub slate_limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub generator: GeneratorConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog_path: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            days: 30,
            starting_agents: 50,
            growth_rate: 0.30,
            churn_rate: 0.90,
            engagement_weights: EngagementWeights::default(),
            activation_prob_per_round: 0.043,
            hourly_activity: None,
            visibility_window_rounds: 180,
            thread_read_depth: 3,
            slate_limit: 10,
            seed: None,
            generator: GeneratorConfig::default(),
            catalog_path: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl SimConfig {
    /// Checks parameter domains. `days = 0` is allowed here (a run that only
    /// seeds the population); file-loaded configs must ask for at least one day.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        for (name, w) in Action::PRIMITIVES.iter().zip(self.engagement_weights.as_array()) {
            if !(w.is_finite() && w > 0.0) {
                return invalid(format!("engagement_weights.{} must be positive, got {w}", name.key()));
            }
        }
        for (name, r) in [
            ("growth_rate", self.growth_rate),
            ("churn_rate", self.churn_rate),
            ("activation_prob_per_round", self.activation_prob_per_round),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return invalid(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        if let Some(profile) = &self.hourly_activity {
            if profile.len() != 24 {
                return invalid(format!("hourly_activity needs 24 entries, got {}", profile.len()));
            }
            if profile.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return invalid("hourly_activity entries must be non-negative".into());
            }
        }
        if self.thread_read_depth == 0 {
            return invalid("thread_read_depth must be at least 1".into());
        }
        if self.generator.mode == GeneratorMode::Http && self.generator.url.is_none() {
            return invalid("generator.url is required when generator.mode = \"http\"".into());
        }
        Ok(())
    }

    /// Activation probability for an hour of the day, after the hourly profile.
    /// The profile is rescaled to mean 1 so the daily expectation is unchanged.
    pub fn activation_prob(&self, hour: u32) -> f64 {
        match &self.hourly_activity {
            None => self.activation_prob_per_round,
            Some(profile) => {
                let mean = profile.iter().sum::<f64>() / 24.0;
                if mean == 0.0 {
                    return 0.0;
                }
                (self.activation_prob_per_round * profile[hour as usize % 24] / mean).min(1.0)
            }
        }
    }

    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map_or(1, |span| text[..span.start.min(text.len())].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        if config.days == 0 {
            return Err(ConfigError::Invalid("days must be at least 1".into()));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text, path)?;
        // relative catalog paths are relative to the config file
        if let (Some(catalog), Some(dir)) = (&config.catalog_path, path.parent()) {
            if catalog.is_relative() {
                config.catalog_path = Some(dir.join(catalog));
            }
        }
        Ok(config)
    }
}
