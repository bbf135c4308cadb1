use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Vision,
}

/// A named model endpoint configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    #[serde(default)]
    pub name: String,
    pub endpoint_url: String,
    pub model_id: String,
    pub modality: Modality,
    #[serde(default = "default_context")]
    pub max_context_tokens: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Whether the endpoint accepts whole video files. When false, video is
    /// sent as sampled frames.
    #[serde(default = "default_true")]
    pub native_video: bool,
}

fn default_context() -> usize {
    128_000
}
fn default_temperature() -> f64 {
    0.2
}
fn default_timeout() -> u64 {
    300
}
fn default_retries() -> u32 {
    3
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile {0}: max_context_tokens must be positive")]
    ZeroContext(String),
    #[error("profile {0}: temperature {1} outside [0, 2]")]
    Temperature(String, f64),
    #[error("profile {0}: empty endpoint_url or model_id")]
    MissingEndpoint(String),
}

impl ModelProfile {
    /// Text profile with the 128K-token window and default sampling.
    pub fn text_default(name: &str, endpoint_url: &str) -> Self {
        Self {
            name: name.to_string(),
            endpoint_url: endpoint_url.to_string(),
            model_id: name.to_string(),
            modality: Modality::Text,
            max_context_tokens: default_context(),
            temperature: default_temperature(),
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            native_video: true,
        }
    }

    pub fn vision_default(name: &str, endpoint_url: &str) -> Self {
        Self { modality: Modality::Vision, ..Self::text_default(name, endpoint_url) }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.max_context_tokens == 0 {
            return Err(ProfileError::ZeroContext(self.name.clone()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProfileError::Temperature(self.name.clone(), self.temperature));
        }
        if self.endpoint_url.trim().is_empty() || self.model_id.trim().is_empty() {
            return Err(ProfileError::MissingEndpoint(self.name.clone()));
        }
        Ok(())
    }

    /// Vision profiles also accept plain text requests.
    pub fn accepts_attachments(&self) -> bool {
        self.modality == Modality::Vision
    }
}
