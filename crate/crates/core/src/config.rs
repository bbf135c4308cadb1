//! Workspace configuration and case files (TOML).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

use crate::extract::{ConverterConfig, DEFAULT_CONVERTER_EXTENSIONS};
use crate::gateway::{Modality, ModelProfile, ProfileError, DEFAULT_MAX_CONCURRENT};
use crate::ingest::EvidenceKind;
use crate::media::asr::AsrEndpoint;
use crate::media::video::DEFAULT_MAX_DURATION_S;
use crate::media::DEFAULT_IMAGE_MAX_DIM;
use crate::text::rules::{RuleConfig, REGISTERED_RULES};
use crate::triage::CaseContext;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("profile name {0:?} must use only letters, digits, '-', '_' or '.'")]
    ProfileName(String),
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("unknown evidence kind {0:?} in [models]")]
    UnknownKind(String),
    #[error("unknown rule id {0:?} in rules.enabled")]
    UnknownRule(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub max_concurrent: usize,
    pub backoff_base_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { max_concurrent: DEFAULT_MAX_CONCURRENT, backoff_base_ms: 1000 }
    }
}

impl GatewayConfig {
    pub fn backoff_base(&self) -> Duration {
        Duration::from_millis(self.backoff_base_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediaConfig {
    pub image_max_dim: u32,
    pub video_max_duration_s: f64,
    /// Template with `{input}`, `{time}`, `{output}` for frame sampling.
    pub frame_command: Option<String>,
}

impl Default for MediaConfig {
    fn default() -> Self {
        Self { image_max_dim: DEFAULT_IMAGE_MAX_DIM, video_max_duration_s: DEFAULT_MAX_DURATION_S, frame_command: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsrConfig {
    pub url: String,
    pub model: String,
    #[serde(default = "default_asr_timeout")]
    pub timeout_s: u64,
}

fn default_asr_timeout() -> u64 {
    600
}

impl AsrConfig {
    pub fn endpoint(&self) -> AsrEndpoint {
        AsrEndpoint { url: self.url.clone(), model: self.model.clone(), timeout_s: self.timeout_s }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterSection {
    pub command: String,
    #[serde(default = "default_converter_extensions")]
    pub extensions: Vec<String>,
}

fn default_converter_extensions() -> Vec<String> {
    DEFAULT_CONVERTER_EXTENSIONS.iter().map(|s| s.to_string()).collect()
}

/// Workspace `config` file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gateway: GatewayConfig,
    pub profiles: BTreeMap<String, ModelProfile>,
    pub rules: RuleConfig,
    pub media: MediaConfig,
    pub asr: Option<AsrConfig>,
    pub converter: Option<ConverterSection>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}

pub fn is_safe_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) && name != "." && name != ".."
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg: Config =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.to_string() })?;
        for (name, profile) in cfg.profiles.iter_mut() {
            if !is_safe_name(name) {
                return Err(ConfigError::ProfileName(name.clone()));
            }
            profile.name = name.clone();
            profile.validate()?;
        }
        if let Some(bad) = cfg.rules.enabled.iter().find(|r| !REGISTERED_RULES.contains(&r.as_str())) {
            return Err(ConfigError::UnknownRule(bad.clone()));
        }
        if cfg.gateway.max_concurrent == 0 {
            return Err(ConfigError::Invalid("gateway.max_concurrent must be at least 1".into()));
        }
        let cap = cfg.media.video_max_duration_s;
        if cfg.media.image_max_dim == 0 || cap.is_nan() || cap <= 0.0 {
            return Err(ConfigError::Invalid("media caps must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn profile(&self, name: &str) -> Result<&ModelProfile, ConfigError> {
        self.profiles.get(name).ok_or_else(|| ConfigError::UnknownProfile(name.to_string()))
    }

    pub fn converter(&self) -> Option<ConverterConfig> {
        self.converter.as_ref().map(|c| ConverterConfig { command: c.command.clone(), extensions: c.extensions.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub id: String,
    #[serde(default)]
    pub background: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub extra_instructions: Option<String>,
}

/// Case file: context, per-kind model selection and repetition count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    #[serde(default = "one")]
    pub runs_per_chunk: u32,
    pub case: CaseSection,
    #[serde(default)]
    pub models: BTreeMap<String, Vec<String>>,
}

fn one() -> u32 {
    1
}

impl CaseFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cf: CaseFile =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.to_string() })?;
        if cf.runs_per_chunk == 0 {
            return Err(ConfigError::Invalid("runs_per_chunk must be at least 1".into()));
        }
        if let Some(bad) = cf.models.keys().find(|k| EvidenceKind::parse(k).is_none()) {
            return Err(ConfigError::UnknownKind(bad.clone()));
        }
        cf.context()?;
        Ok(cf)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn context(&self) -> Result<CaseContext, ConfigError> {
        CaseContext::new(&self.case.id, &self.case.background, &self.case.keywords, self.case.extra_instructions.as_deref())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Whether a profile can take this kind's extraction output.
pub fn compatible(kind: EvidenceKind, profile: &ModelProfile) -> bool {
    !kind.is_visual() || profile.modality == Modality::Vision
}

/// Profiles for one kind. An explicit list (command-line override, then the
/// case file's `[models]` entry) is filtered for compatibility; without one,
/// visual kinds use every vision profile and text kinds every text profile,
/// falling back to vision profiles when no text profile exists.
pub fn select_profiles<'a>(
    config: &'a Config,
    case: &CaseFile,
    kind: EvidenceKind,
    overrides: Option<&[String]>,
) -> Result<Vec<&'a ModelProfile>, ConfigError> {
    let explicit = overrides.or_else(|| case.models.get(kind.as_str()).map(Vec::as_slice));
    if let Some(names) = explicit {
        let mut out = Vec::new();
        for n in names {
            let p = config.profile(n)?;
            if compatible(kind, p) && !out.iter().any(|q: &&ModelProfile| q.name == p.name) {
                out.push(p);
            }
        }
        return Ok(out);
    }
    let by = |m: Modality| config.profiles.values().filter(move |p| p.modality == m);
    Ok(if kind.is_visual() {
        by(Modality::Vision).collect()
    } else {
        let text: Vec<_> = by(Modality::Text).collect();
        if text.is_empty() {
            by(Modality::Vision).collect()
        } else {
            text
        }
    })
}
