//! Deterministic flags raised without any model involvement.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::fmt;

use super::docx::DocMetadata;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
}

impl Severity {
    /// Lenient parse for model output; anything unrecognized is `Low`.
    pub fn parse_lenient(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" | "critical" => Severity::High,
            "medium" | "moderate" => Severity::Medium,
            _ => Severity::Low,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
        })
    }
}

pub const RULE_METADATA_ANOMALY: &str = "metadata-anomaly";
pub const RULE_SUSPICIOUS_AUTHOR: &str = "suspicious-author";
pub const RULE_FUTURE_TIMESTAMP: &str = "future-timestamp";
pub const RULE_UNPROCESSABLE: &str = "unprocessable";

/// Every rule id the pipeline can emit.
pub const REGISTERED_RULES: &[&str] =
    &[RULE_METADATA_ANOMALY, RULE_SUSPICIOUS_AUTHOR, RULE_FUTURE_TIMESTAMP, RULE_UNPROCESSABLE];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleFlag {
    pub label: String,
    pub severity: Severity,
    pub rationale: String,
    pub rule_id: String,
}

impl RuleFlag {
    pub fn unprocessable(reason: &str) -> Self {
        RuleFlag {
            label: RULE_UNPROCESSABLE.into(),
            severity: Severity::Low,
            rationale: format!("extraction failed: {reason}"),
            rule_id: RULE_UNPROCESSABLE.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub suspicious_authors: Vec<String>,
    pub enabled: Vec<String>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            suspicious_authors: vec!["Admin".into(), "Administrator".into()],
            enabled: vec![RULE_METADATA_ANOMALY.into(), RULE_SUSPICIOUS_AUTHOR.into(), RULE_FUTURE_TIMESTAMP.into()],
        }
    }
}

impl RuleConfig {
    fn on(&self, rule: &str) -> bool {
        self.enabled.iter().any(|r| r == rule)
    }
}

fn fmt_ts(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%d %H:%M:%S UTC").to_string()
}

/// Metadata rules for office documents. `now` is the analysis time used by
/// the future-timestamp rule; nothing here reads the clock.
pub fn metadata_rule_flags(meta: &DocMetadata, rules: &RuleConfig, now: DateTime<Utc>) -> Vec<RuleFlag> {
    let mut flags = Vec::new();
    if rules.on(RULE_METADATA_ANOMALY) {
        if let (Some(created), Some(modified)) = (meta.created, meta.modified) {
            if modified < created {
                flags.push(RuleFlag {
                    label: RULE_METADATA_ANOMALY.into(),
                    severity: Severity::High,
                    rationale: format!(
                        "last modification ({}) precedes creation ({})",
                        fmt_ts(&modified),
                        fmt_ts(&created)
                    ),
                    rule_id: RULE_METADATA_ANOMALY.into(),
                });
            }
        }
    }
    if rules.on(RULE_SUSPICIOUS_AUTHOR) {
        if let Some(by) = &meta.last_modified_by {
            if rules.suspicious_authors.iter().any(|a| a.trim().eq_ignore_ascii_case(by.trim())) {
                flags.push(RuleFlag {
                    label: RULE_SUSPICIOUS_AUTHOR.into(),
                    severity: Severity::Medium,
                    rationale: format!("last modified by generic account \"{by}\""),
                    rule_id: RULE_SUSPICIOUS_AUTHOR.into(),
                });
            }
        }
    }
    if rules.on(RULE_FUTURE_TIMESTAMP) {
        let future: Vec<String> = [("created", meta.created), ("modified", meta.modified)]
            .into_iter()
            .filter_map(|(name, t)| t.filter(|t| *t > now).map(|t| format!("{name} {}", fmt_ts(&t))))
            .collect();
        if !future.is_empty() {
            flags.push(RuleFlag {
                label: RULE_FUTURE_TIMESTAMP.into(),
                severity: Severity::Medium,
                rationale: format!("timestamp after analysis time {}: {}", fmt_ts(&now), future.join(", ")),
                rule_id: RULE_FUTURE_TIMESTAMP.into(),
            });
        }
    }
    flags
}
