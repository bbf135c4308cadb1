//! Client for an external speech-recognition service.
//!
//! Wire contract: `POST` multipart with fields `file` and `model`; the JSON
//! response carries `text` and optionally `language` and `segments`.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub text: String,
    pub language: Option<String>,
    pub segments: Vec<TranscriptSegment>,
    pub asr_model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrEndpoint {
    pub url: String,
    pub model: String,
    pub timeout_s: u64,
}

#[derive(Debug, Error)]
pub enum AsrError {
    #[error("transcription endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("transcription rejected with status {status}: {body}")]
    AsrRejected { status: u16, body: String },
    #[error("empty transcript")]
    EmptyTranscript,
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Deserialize)]
struct WireSegment {
    start: f64,
    end: f64,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    segments: Vec<WireSegment>,
}

/// Sort by start and clip each segment so it ends no later than the next
/// one begins. Segments with non-finite or inverted bounds are dropped.
pub fn normalize_segments(mut segs: Vec<TranscriptSegment>) -> Vec<TranscriptSegment> {
    segs.retain(|s| s.start_s.is_finite() && s.end_s.is_finite() && s.end_s >= s.start_s && s.start_s >= 0.0);
    segs.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for i in 1..segs.len() {
        let next_start = segs[i].start_s;
        if segs[i - 1].end_s > next_start {
            segs[i - 1].end_s = next_start;
        }
    }
    segs
}

/// Parse a transcription response body.
pub fn parse_transcript(body: &str, asr_model: &str) -> Result<Transcript, AsrError> {
    let wire: WireResponse = serde_json::from_str(body)
        .map_err(|e| AsrError::AsrRejected { status: 200, body: format!("malformed response: {e}") })?;
    if wire.text.trim().is_empty() {
        return Err(AsrError::EmptyTranscript);
    }
    let segments = wire
        .segments
        .into_iter()
        .map(|s| TranscriptSegment { start_s: s.start, end_s: s.end, text: s.text.trim().to_string() })
        .collect();
    Ok(Transcript {
        text: wire.text.trim().to_string(),
        language: wire.language,
        segments: normalize_segments(segments),
        asr_model: asr_model.to_string(),
    })
}

/// Upload the file and return its transcript. Empty files are not sent.
pub fn transcribe_audio(path: &Path, endpoint: &AsrEndpoint) -> Result<Transcript, AsrError> {
    let bytes = std::fs::read(path).map_err(|e| AsrError::Io(e.to_string()))?;
    if bytes.is_empty() {
        return Err(AsrError::EmptyTranscript);
    }
    let filename = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "audio".into());
    let form = reqwest::blocking::multipart::Form::new()
        .part("file", reqwest::blocking::multipart::Part::bytes(bytes).file_name(filename))
        .text("model", endpoint.model.clone());
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(endpoint.timeout_s.max(1)))
        .build()
        .map_err(|e| AsrError::EndpointUnreachable(e.to_string()))?;
    let resp = client
        .post(&endpoint.url)
        .multipart(form)
        .send()
        .map_err(|e| AsrError::EndpointUnreachable(e.to_string()))?;
    let status = resp.status().as_u16();
    let body = resp.text().map_err(|e| AsrError::EndpointUnreachable(e.to_string()))?;
    if !(200..300).contains(&status) {
        return Err(AsrError::AsrRejected { status, body });
    }
    parse_transcript(&body, &endpoint.model)
}
