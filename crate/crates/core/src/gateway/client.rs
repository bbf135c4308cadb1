//! Bounded, retrying chat-completion client.

use serde::{Deserialize, Serialize};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;

use super::profile::ModelProfile;
use super::wire::ChatRequest;

pub const DEFAULT_MAX_CONCURRENT: usize = 2;
pub const DEFAULT_BACKOFF_BASE: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub raw_text: String,
    pub token_usage: Option<TokenUsage>,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GatewayError {
    #[error("endpoint unreachable after {attempts} attempt(s): {detail}")]
    EndpointUnreachable { attempts: u32, detail: String },
    #[error("endpoint timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("model rejected request with status {status}: {body}")]
    ModelError { status: u16, body: String },
    #[error("response has no assistant text: {0}")]
    MalformedResponse(String),
    #[error("profile {0} is text-only but the request carries attachments")]
    AttachmentsNotSupported(String),
    #[error("request has no user message")]
    NoUserMessage,
    #[error("reading attachment: {0}")]
    Attachment(String),
}

impl GatewayError {
    pub fn attempts(&self) -> u32 {
        match self {
            GatewayError::EndpointUnreachable { attempts, .. } | GatewayError::Timeout { attempts } => *attempts,
            GatewayError::ModelError { .. } | GatewayError::MalformedResponse(_) => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{detail}")]
pub struct TransportError {
    pub timed_out: bool,
    pub detail: String,
}

/// One HTTP POST of a JSON body. Returns status and response text.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, body: &[u8], timeout: Duration) -> Result<(u16, String), TransportError>;
}

/// Blocking HTTP transport.
#[derive(Debug, Clone, Default)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &[u8], timeout: Duration) -> Result<(u16, String), TransportError> {
        let err = |e: reqwest::Error| TransportError { timed_out: e.is_timeout(), detail: e.to_string() };
        let resp = self
            .client
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .timeout(timeout)
            .body(body.to_vec())
            .send()
            .map_err(err)?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(err)?;
        Ok((status, text))
    }
}

/// Counting semaphore bounding in-flight model calls.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits.max(1)), freed: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

/// Pull `choices[0].message.content` and usage out of a response body.
pub fn parse_completion(body: &str) -> Result<(String, Option<TokenUsage>), GatewayError> {
    let wire: WireResponse = serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let text = wire
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?;
    let usage = wire.usage.map(|u| TokenUsage { prompt: u.prompt_tokens, completion: u.completion_tokens });
    Ok((text, usage))
}

/// Shared client: one semaphore for all workers, exponential backoff on
/// 5xx and transport failures.
pub struct Gateway {
    transport: Arc<dyn Transport>,
    semaphore: Semaphore,
    backoff_base: Duration,
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>, max_concurrent: usize, backoff_base: Duration) -> Self {
        Self { transport, semaphore: Semaphore::new(max_concurrent), backoff_base }
    }

    pub fn http(max_concurrent: usize, backoff_base: Duration) -> Self {
        Self::new(Arc::new(HttpTransport::new()), max_concurrent, backoff_base)
    }

    /// Send `request` to `profile`. The body is encoded once, so retries
    /// resend identical bytes. `max_retries` counts resends after the first
    /// attempt.
    pub fn chat_complete(&self, profile: &ModelProfile, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if !request.has_user_message() {
            return Err(GatewayError::NoUserMessage);
        }
        if request.has_media() && !profile.accepts_attachments() {
            return Err(GatewayError::AttachmentsNotSupported(profile.name.clone()));
        }
        let body = request
            .wire_body(&profile.model_id, profile.temperature)
            .map_err(|e| GatewayError::Attachment(e.to_string()))?;
        let timeout = Duration::from_secs(profile.timeout_s.max(1));
        let started = Instant::now();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.semaphore.acquire();
                self.transport.post_json(&profile.endpoint_url, &body, timeout)
            };
            let failure = match result {
                Ok((status, text)) if (200..300).contains(&status) => {
                    let (raw_text, token_usage) = parse_completion(&text)?;
                    return Ok(ChatResponse {
                        raw_text,
                        token_usage,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt_count: attempt,
                    });
                }
                Ok((status, text)) if status < 500 => return Err(GatewayError::ModelError { status, body: text }),
                Ok((status, text)) => TransportError { timed_out: false, detail: format!("status {status}: {text}") },
                Err(e) => e,
            };
            if attempt > profile.max_retries {
                return Err(if failure.timed_out {
                    GatewayError::Timeout { attempts: attempt }
                } else {
                    GatewayError::EndpointUnreachable { attempts: attempt, detail: failure.detail }
                });
            }
            std::thread::sleep(self.backoff_base.saturating_mul(1u32 << (attempt - 1).min(16)));
        }
    }
}
