use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::money::Price;

const GPT35_PROFILE: &str = include_str!("../../resources/profiles/gpt-3.5.toml");
const GPT4_PROFILE: &str = include_str!("../../resources/profiles/gpt-4.toml");

/// Names accepted by [`load_profile`] in place of a path.
pub const BUILTIN_PROFILES: [&str; 2] = ["gpt-3.5", "gpt-4"];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read profile {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed profile: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("malformed profile: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Initial,
    Critique,
    Final,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::Critique => "critique",
            Stage::Final => "final",
        }
    }
}

/// Sampling parameters and report count of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: Stage,
    pub n_reports: u32,
    pub temperature: f64,
    pub top_p: f64,
}

impl StageConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let name = self.stage.as_str();
        if self.n_reports == 0 {
            return Err(ConfigError::Invalid(format!("{name}: n_reports must be positive")));
        }
        if self.stage == Stage::Final && self.n_reports != 1 {
            return Err(ConfigError::Invalid("final stage produces exactly one report".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::Invalid(format!("{name}: temperature outside [0, 2]")));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ConfigError::Invalid(format!("{name}: top_p outside (0, 1]")));
        }
        Ok(())
    }
}

/// The three stage configurations of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSet {
    pub initial: StageConfig,
    pub critique: StageConfig,
    #[serde(rename = "final")]
    pub final_: StageConfig,
}

impl StageSet {
    /// Default sampling: exploratory first pass, constrained critique,
    /// focused final report. Critique mirrors the initial report count.
    pub fn for_profile(profile: &ModelProfile) -> StageSet {
        let n = profile.n_initial_reports;
        StageSet {
            initial: StageConfig {
                stage: Stage::Initial,
                n_reports: n,
                temperature: 1.0,
                top_p: 0.9,
            },
            critique: StageConfig {
                stage: Stage::Critique,
                n_reports: n,
                temperature: 0.75,
                top_p: 0.6,
            },
            final_: StageConfig {
                stage: Stage::Final,
                n_reports: 1,
                temperature: 0.5,
                top_p: 0.5,
            },
        }
    }

    pub fn get(&self, stage: Stage) -> &StageConfig {
        match stage {
            Stage::Initial => &self.initial,
            Stage::Critique => &self.critique,
            Stage::Final => &self.final_,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for s in [&self.initial, &self.critique, &self.final_] {
            s.validate()?;
        }
        if self.critique.n_reports != self.initial.n_reports {
            return Err(ConfigError::Invalid(
                "critique must produce as many reports as the initial stage".into(),
            ));
        }
        Ok(())
    }
}

/// A model with its context size, report count and prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub model_id: String,
    pub context_tokens: usize,
    pub n_initial_reports: u32,
    pub price_prompt_per_1k: Price,
    pub price_completion_per_1k: Price,
    #[serde(default = "default_reserve")]
    pub completion_reserve_tokens: usize,
    /// Base URL of an OpenAI-compatible endpoint for the live backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<u32>,
}

fn default_reserve() -> usize {
    2000
}

impl ModelProfile {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.model_id.trim().is_empty() {
            return Err(ConfigError::Invalid("model_id is empty".into()));
        }
        if self.n_initial_reports == 0 {
            return Err(ConfigError::Invalid("n_initial_reports must be positive".into()));
        }
        if self.completion_reserve_tokens == 0 {
            return Err(ConfigError::Invalid("completion_reserve_tokens must be positive".into()));
        }
        if self.context_tokens < self.completion_reserve_tokens + 256 {
            return Err(ConfigError::Invalid(format!(
                "context_tokens {} leaves less than 256 tokens beside the {} token completion reserve",
                self.context_tokens, self.completion_reserve_tokens
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct StageOverride {
    temperature: Option<f64>,
    top_p: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct StageOverrides {
    initial: Option<StageOverride>,
    critique: Option<StageOverride>,
    #[serde(rename = "final")]
    final_: Option<StageOverride>,
}

#[derive(Debug, Deserialize)]
struct ProfileFile {
    #[serde(flatten)]
    model: ModelProfile,
    #[serde(default)]
    stages: StageOverrides,
}

/// A loaded profile: the model and its validated stage set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub model: ModelProfile,
    pub stages: StageSet,
}

impl Profile {
    pub fn builtin(name: &str) -> Option<Profile> {
        let text = match name {
            "gpt-3.5" => GPT35_PROFILE,
            "gpt-4" => GPT4_PROFILE,
            _ => return None,
        };
        Some(Profile::from_toml(text).expect("bundled profile is valid"))
    }

    pub fn from_toml(text: &str) -> Result<Profile, ConfigError> {
        Profile::from_file(toml::from_str(text)?)
    }

    pub fn from_json(text: &str) -> Result<Profile, ConfigError> {
        Profile::from_file(serde_json::from_str(text)?)
    }

    fn from_file(file: ProfileFile) -> Result<Profile, ConfigError> {
        file.model.validate()?;
        let mut stages = StageSet::for_profile(&file.model);
        for (cfg, ov) in [
            (&mut stages.initial, file.stages.initial),
            (&mut stages.critique, file.stages.critique),
            (&mut stages.final_, file.stages.final_),
        ] {
            if let Some(ov) = ov {
                cfg.temperature = ov.temperature.unwrap_or(cfg.temperature);
                cfg.top_p = ov.top_p.unwrap_or(cfg.top_p);
            }
        }
        stages.validate()?;
        Ok(Profile {
            model: file.model,
            stages,
        })
    }
}

/// Loads a profile from a `.toml` or `.json` file, or by built-in name.
pub fn load_profile(spec: &str) -> Result<Profile, ConfigError> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(p) = Profile::builtin(spec) {
            return Ok(p);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: spec.to_string(),
        source,
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        Profile::from_json(&text)
    } else {
        Profile::from_toml(&text)
    }
}
