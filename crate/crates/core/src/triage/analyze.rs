//! Fan-out of one evidence item over units, profiles and repetitions, with
//! one persisted run file per request.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

use super::context::CaseContext;
use super::prompt::{build_prompt, PromptInput, TEMPLATE_VERSION};
use super::verdict::{parse_verdict, Verdict};
use crate::extract::{ExtractionResult, UnitContent};
use crate::gateway::{ChatRequest, Gateway, ModelProfile, TokenUsage};
use crate::ingest::{CustodyAction, CustodyLedger, EvidenceItem, LedgerError};
use crate::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRun {
    pub run_id: String,
    pub evidence_id: String,
    pub chunk_ref: String,
    pub profile_name: String,
    pub model_id: String,
    pub repetition: u32,
    pub template_version: String,
    /// Canonical request text; its SHA-256 is `request_digest`.
    pub request_canonical: String,
    pub request_digest: String,
    pub raw_response: Option<String>,
    pub attempt_count: u32,
    pub latency_ms: u64,
    pub token_usage: Option<TokenUsage>,
    /// Gateway failure, if no response was obtained.
    pub error: Option<String>,
    pub verdict: Verdict,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl AnalysisRun {
    /// A run with a model response; failed runs are retried on resume.
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }

    pub fn digest_matches(&self) -> bool {
        sha256_hex(self.request_canonical.as_bytes()) == self.request_digest
    }
}

/// Deterministic id for a (item, profile, unit, repetition) slot.
pub fn run_id(evidence_id: &str, profile: &str, chunk_ref: &str, repetition: u32) -> String {
    sha256_hex(format!("{evidence_id}|{profile}|{chunk_ref}|{repetition}").as_bytes())[..16].to_string()
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("run store {path}: {source}")]
    Store { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// One JSON file per run under a workspace directory.
#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, evidence_id: &str, profile: &str, chunk_ref: &str, repetition: u32) -> PathBuf {
        self.dir.join(format!("{evidence_id}__{profile}__{chunk_ref}__{repetition}.json"))
    }

    pub fn load(&self, evidence_id: &str, profile: &str, chunk_ref: &str, repetition: u32) -> Option<AnalysisRun> {
        let text = std::fs::read_to_string(self.path_for(evidence_id, profile, chunk_ref, repetition)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Write via a temporary file and rename so readers never see a partial run.
    pub fn save(&self, run: &AnalysisRun) -> Result<(), AnalyzeError> {
        let path = self.path_for(&run.evidence_id, &run.profile_name, &run.chunk_ref, run.repetition);
        let err = |source| AnalyzeError::Store { path: path.clone(), source };
        std::fs::create_dir_all(&self.dir).map_err(err)?;
        let tmp = path.with_extension("json.tmp");
        let mut text = serde_json::to_string_pretty(run).expect("runs serialize");
        text.push('\n');
        std::fs::write(&tmp, text).map_err(err)?;
        std::fs::rename(&tmp, &path).map_err(err)
    }

    /// All stored runs for one item, in file-name order.
    pub fn runs_for(&self, evidence_id: &str) -> Result<Vec<AnalysisRun>, AnalyzeError> {
        let err = |source| AnalyzeError::Store { path: self.dir.clone(), source };
        let entries = match std::fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(err(e)),
        };
        let prefix = format!("{evidence_id}__");
        let mut names: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(&prefix) && n.ends_with(".json"))
            })
            .collect();
        names.sort();
        let mut runs = Vec::with_capacity(names.len());
        for p in names {
            let text = std::fs::read_to_string(&p).map_err(|source| AnalyzeError::Store { path: p.clone(), source })?;
            if let Ok(run) = serde_json::from_str(&text) {
                runs.push(run);
            }
        }
        Ok(runs)
    }
}

/// Shared collaborators for analysis.
pub struct AnalysisEnv<'a> {
    pub ctx: &'a CaseContext,
    pub gateway: &'a Gateway,
    pub store: &'a RunStore,
    pub ledger: &'a Mutex<CustodyLedger>,
    pub actor: &'a str,
}

/// Every unit is sent to every profile `runs_per_chunk` times, in unit,
/// profile, repetition order. Completed runs already in the store are
/// reused. Gateway failures become degraded runs.
pub fn analyze_evidence(
    item: &EvidenceItem,
    extraction: &ExtractionResult,
    profiles: &[&ModelProfile],
    runs_per_chunk: u32,
    env: &AnalysisEnv<'_>,
) -> Result<Vec<AnalysisRun>, AnalyzeError> {
    let mut runs = Vec::new();
    for unit in &extraction.units {
        let input = match &unit.content {
            UnitContent::Text { text } => PromptInput::Text { label: &unit.label, text },
            UnitContent::Media { caption, attachments } => PromptInput::Media { caption, attachments },
        };
        let messages = build_prompt(item.kind, env.ctx, input);
        for profile in profiles {
            let request = ChatRequest { profile: profile.name.clone(), messages: messages.clone() };
            let canonical = request.canonical_json(&profile.model_id, profile.temperature);
            let digest = sha256_hex(canonical.as_bytes());
            for rep in 0..runs_per_chunk.max(1) {
                if let Some(done) = env.store.load(&item.id, &profile.name, &unit.chunk_ref, rep) {
                    if done.is_complete() && done.request_digest == digest {
                        runs.push(done);
                        continue;
                    }
                }
                let started_at = Utc::now();
                let outcome = env.gateway.chat_complete(profile, &request);
                let finished_at = Utc::now();
                let (raw_response, attempt_count, latency_ms, token_usage, error, verdict) = match outcome {
                    Ok(resp) => {
                        let verdict = parse_verdict(&resp.raw_text);
                        (Some(resp.raw_text), resp.attempt_count, resp.latency_ms, resp.token_usage, None, verdict)
                    }
                    Err(e) => {
                        let detail = e.to_string();
                        (None, e.attempts(), 0, None, Some(detail.clone()), Verdict::unavailable(&detail))
                    }
                };
                let run = AnalysisRun {
                    run_id: run_id(&item.id, &profile.name, &unit.chunk_ref, rep),
                    evidence_id: item.id.clone(),
                    chunk_ref: unit.chunk_ref.clone(),
                    profile_name: profile.name.clone(),
                    model_id: profile.model_id.clone(),
                    repetition: rep,
                    template_version: TEMPLATE_VERSION.to_string(),
                    request_canonical: canonical.clone(),
                    request_digest: digest.clone(),
                    raw_response,
                    attempt_count,
                    latency_ms,
                    token_usage,
                    error,
                    verdict,
                    started_at,
                    finished_at,
                };
                env.store.save(&run)?;
                env.ledger
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .append(CustodyAction::Analyzed, &item.id, &item.sha256, env.actor)?;
                runs.push(run);
            }
        }
    }
    Ok(runs)
}
