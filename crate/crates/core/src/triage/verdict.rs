//! Model output to structured verdict. Parsing is total: anything that does
//! not carry a valid JSON block becomes a degraded verdict.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::text::Severity;

pub const MAX_RELEVANCE: u8 = 10;
const SUMMARY_EXCERPT_CHARS: usize = 500;
const ALERT_TERMS: [&str; 4] = ["red flag", "suspicious", "anomal", "tamper"];
pub const MODEL_UNAVAILABLE: &str = "model-unavailable";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Structured,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictFlag {
    pub label: String,
    pub severity: Severity,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub relevance: u8,
    pub flags: Vec<VerdictFlag>,
    pub summary: String,
    pub parse_status: ParseStatus,
}

impl Verdict {
    /// Stand-in when no model answer could be obtained at all.
    pub fn unavailable(detail: &str) -> Self {
        Verdict {
            relevance: 0,
            flags: vec![VerdictFlag {
                label: MODEL_UNAVAILABLE.into(),
                severity: Severity::Low,
                rationale: detail.to_string(),
            }],
            summary: format!("no model verdict: {detail}"),
            parse_status: ParseStatus::Degraded,
        }
    }

    pub fn satisfies_invariants(&self) -> bool {
        self.relevance <= MAX_RELEVANCE && (self.parse_status == ParseStatus::Structured || !self.summary.is_empty())
    }
}

/// Body of the last ```json fence. An unterminated final fence runs to the
/// end of the text.
fn last_json_fence(raw: &str) -> Option<&str> {
    let lower = raw.to_ascii_lowercase();
    let start = lower.rmatch_indices("```json").map(|(i, _)| i).next()?;
    let body = &raw[start + "```json".len()..];
    Some(match body.find("```") {
        Some(end) => &body[..end],
        None => body,
    })
}

/// Last `{...}` that parses as a JSON object and is not nested in an
/// earlier one.
fn last_top_level_object(raw: &str) -> Option<Value> {
    let mut found = None;
    let mut i = 0;
    while let Some(off) = raw[i..].find('{') {
        let at = i + off;
        let mut stream = serde_json::Deserializer::from_str(&raw[at..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v @ Value::Object(_))) => {
                i = at + stream.byte_offset();
                found = Some(v);
            }
            _ => i = at + 1,
        }
    }
    found
}

fn relevance_of(v: &Value) -> Option<u8> {
    let x = v.as_f64()?;
    Some(x.round().clamp(0.0, MAX_RELEVANCE as f64) as u8)
}

fn validate(v: &Value) -> Option<Verdict> {
    let obj = v.as_object()?;
    let relevance = relevance_of(obj.get("relevance")?)?;
    let summary = obj.get("summary")?.as_str()?.to_string();
    let flags = match obj.get("flags") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|f| {
                let f = f.as_object()?;
                let label = f.get("label")?.as_str()?.trim().to_string();
                (!label.is_empty()).then(|| VerdictFlag {
                    label,
                    severity: Severity::parse_lenient(f.get("severity").and_then(Value::as_str).unwrap_or("")),
                    rationale: f.get("rationale").and_then(Value::as_str).unwrap_or("").to_string(),
                })
            })
            .collect(),
        Some(_) => return None,
    };
    Some(Verdict { relevance, flags, summary, parse_status: ParseStatus::Structured })
}

fn degraded(raw: &str) -> Verdict {
    let lower = raw.to_lowercase();
    let relevance = if ALERT_TERMS.iter().any(|t| lower.contains(t)) { 5 } else { 1 };
    let excerpt: String = raw.chars().take(SUMMARY_EXCERPT_CHARS).collect();
    let summary = if excerpt.trim().is_empty() { "(empty model response)".to_string() } else { excerpt };
    Verdict { relevance, flags: Vec::new(), summary, parse_status: ParseStatus::Degraded }
}

pub fn parse_verdict(raw: &str) -> Verdict {
    let candidate = match last_json_fence(raw) {
        Some(body) => serde_json::from_str::<Value>(body.trim()).ok(),
        None => last_top_level_object(raw),
    };
    candidate.as_ref().and_then(validate).unwrap_or_else(|| degraded(raw))
}

/// Byte-level entry point; invalid UTF-8 is replaced.
pub fn parse_verdict_bytes(raw: &[u8]) -> Verdict {
    parse_verdict(&String::from_utf8_lossy(raw))
}
