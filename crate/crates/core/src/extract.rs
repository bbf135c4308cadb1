//! Per-item extraction: evidence file to model-ready units plus
//! deterministic rule flags.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::gateway::{TextChunk, TokenBudget};
use crate::ingest::{EvidenceItem, EvidenceKind, ItemStatus};
use crate::media::asr::{transcribe_audio, AsrEndpoint, Transcript};
use crate::media::frames::sample_frames;
use crate::media::video::{frame_times, prepare_video};
use crate::media::{prepare_image_bytes, MediaAttachment};
use crate::pcap::{parse_pcap, render::render_packets};
use crate::sha256_hex;
use crate::text::docx::DocContent;
use crate::text::rules::{metadata_rule_flags, RuleConfig, RuleFlag};
use crate::text::{batch_emails, extract_docx, parse_eml, parse_mbox, strip_html};
use crate::gateway::tokens::split_to_budget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UnitContent {
    Text { text: String },
    Media { caption: String, attachments: Vec<MediaAttachment> },
}

/// One model request's worth of evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionUnit {
    /// Stable, filename-safe reference, e.g. `chunk-0003`, `segment-01`.
    pub chunk_ref: String,
    pub label: String,
    pub content: UnitContent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ExtractionStatus {
    Ready,
    Failed { reason: String },
    UnknownKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub evidence_id: String,
    pub kind: EvidenceKind,
    pub status: ExtractionStatus,
    pub units: Vec<ExtractionUnit>,
    pub rule_flags: Vec<RuleFlag>,
    pub notes: Vec<String>,
}

impl ExtractionResult {
    fn failed(item: &EvidenceItem, reason: impl Into<String>) -> Self {
        let reason = reason.into();
        Self {
            evidence_id: item.id.clone(),
            kind: item.kind,
            rule_flags: vec![RuleFlag::unprocessable(&reason)],
            status: ExtractionStatus::Failed { reason },
            units: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn ready(item: &EvidenceItem, units: Vec<ExtractionUnit>) -> Self {
        Self {
            evidence_id: item.id.clone(),
            kind: item.kind,
            status: ExtractionStatus::Ready,
            units,
            rule_flags: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Persistable view without payloads.
    pub fn summary(&self, path: &str) -> ExtractionSummary {
        ExtractionSummary {
            evidence_id: self.evidence_id.clone(),
            path: path.to_string(),
            kind: self.kind,
            status: self.status.clone(),
            chunk_refs: self.units.iter().map(|u| u.chunk_ref.clone()).collect(),
            rule_flags: self.rule_flags.clone(),
            notes: self.notes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub evidence_id: String,
    pub path: String,
    pub kind: EvidenceKind,
    pub status: ExtractionStatus,
    pub chunk_refs: Vec<String>,
    pub rule_flags: Vec<RuleFlag>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VideoMode {
    /// Whole file (or segment) per request.
    Native,
    /// Frames sampled by an external command template.
    Frames { command: String },
    Unavailable,
}

/// External converter for formats without a built-in reader. The command
/// template takes `{input}` and must print plain text or markdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConverterConfig {
    pub command: String,
    pub extensions: Vec<String>,
}

pub const DEFAULT_CONVERTER_EXTENSIONS: &[&str] =
    &["doc", "odt", "ppt", "pptx", "odp", "xls", "xlsx", "ods", "pdf", "rtf"];

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub rules: RuleConfig,
    /// Analysis time for the future-timestamp rule.
    pub now: DateTime<Utc>,
    pub image_max_dim: u32,
    pub video_max_duration_s: f64,
    pub video_mode: VideoMode,
    pub asr: Option<AsrEndpoint>,
    pub converter: Option<ConverterConfig>,
    /// Work area outside the evidence root for frame files.
    pub scratch_dir: PathBuf,
}

fn text_units(chunks: Vec<TextChunk>) -> Vec<ExtractionUnit> {
    chunks
        .into_iter()
        .map(|c| ExtractionUnit {
            chunk_ref: format!("chunk-{:04}", c.index),
            label: c.label,
            content: UnitContent::Text { text: c.text },
        })
        .collect()
}

fn fmt_opt_ts(t: Option<DateTime<Utc>>) -> String {
    t.map(|t| t.format("%Y-%m-%d %H:%M:%S UTC").to_string()).unwrap_or_else(|| "(absent)".into())
}

/// Metadata block, rule findings, then body text.
pub fn render_document(doc: &DocContent, flags: &[RuleFlag]) -> String {
    let m = &doc.metadata;
    let mut s = String::from("Document metadata:\n");
    let or_absent = |v: &Option<String>| v.clone().unwrap_or_else(|| "(absent)".into());
    s.push_str(&format!("  Title: {}\n", or_absent(&m.title)));
    s.push_str(&format!("  Author: {}\n", or_absent(&m.author)));
    s.push_str(&format!("  Last modified by: {}\n", or_absent(&m.last_modified_by)));
    s.push_str(&format!("  Created: {}\n", fmt_opt_ts(m.created)));
    s.push_str(&format!("  Modified: {}\n", fmt_opt_ts(m.modified)));
    s.push_str(&format!("Extractor: {}\n", doc.format_note));
    if !flags.is_empty() {
        s.push_str("Automated checks:\n");
        for f in flags {
            s.push_str(&format!("  {} ({}): {}\n", f.label, f.severity, f.rationale));
        }
    }
    s.push_str("\nContent:\n");
    s.push_str(&doc.text);
    s
}

pub fn render_transcript(t: &Transcript) -> String {
    let mut s = format!(
        "Transcript (speech recognition model {}, language {}):\n",
        t.asr_model,
        t.language.as_deref().unwrap_or("unknown")
    );
    if t.segments.is_empty() {
        s.push_str(&t.text);
    } else {
        for seg in &t.segments {
            s.push_str(&format!("[{:.1}s-{:.1}s] {}\n", seg.start_s, seg.end_s, seg.text));
        }
    }
    s
}

fn extension(path: &str) -> String {
    Path::new(path).extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default()
}

fn run_converter(cfg: &ConverterConfig, input: &Path) -> Result<String, String> {
    let argv: Vec<String> =
        cfg.command.split_whitespace().map(|t| t.replace("{input}", &input.to_string_lossy())).collect();
    let (prog, args) = argv.split_first().ok_or("empty converter command")?;
    let out = Command::new(prog).args(args).output().map_err(|e| format!("converter {prog}: {e}"))?;
    if !out.status.success() {
        return Err(format!("converter {prog} exited with {}", out.status));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Extract one item. Never fails: problems become a `Failed` status with an
/// `unprocessable` rule flag. The file is opened read-only and its hash is
/// checked against the manifest before anything is derived from it.
pub fn extract_item(item: &EvidenceItem, root: &Path, budget: TokenBudget, opts: &ExtractOptions) -> ExtractionResult {
    match &item.status {
        ItemStatus::Registered => {}
        ItemStatus::Symlink { .. } => {
            let mut r = ExtractionResult::ready(item, Vec::new());
            r.status = ExtractionStatus::UnknownKind;
            r.notes.push("symbolic link, not followed".into());
            return r;
        }
        ItemStatus::Unreadable { note } => return ExtractionResult::failed(item, format!("unreadable at registration: {note}")),
    }
    let Some(path) = item.resolve(root) else {
        return ExtractionResult::failed(item, "path escapes evidence root");
    };
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => return ExtractionResult::failed(item, format!("read failed: {e}")),
    };
    if sha256_hex(&bytes) != item.sha256 {
        return ExtractionResult::failed(item, "content changed since registration");
    }

    match item.kind {
        EvidenceKind::Pcap => match parse_pcap(&bytes) {
            Ok(pcap) => {
                let mut r = ExtractionResult::ready(item, text_units(render_packets(&pcap, budget)));
                if let Some(note) = pcap.truncation_note {
                    r.notes.push(note);
                }
                r
            }
            Err(e) => ExtractionResult::failed(item, format!("pcap: {e}")),
        },
        EvidenceKind::Mbox => match parse_mbox(&bytes) {
            Ok(msgs) => ExtractionResult::ready(item, text_units(batch_emails(&msgs, budget))),
            Err(e) => ExtractionResult::failed(item, format!("mbox: {e}")),
        },
        EvidenceKind::Eml => ExtractionResult::ready(item, text_units(batch_emails(&[parse_eml(&bytes)], budget))),
        EvidenceKind::Docx => match extract_docx(&bytes) {
            Ok(doc) => {
                let flags = metadata_rule_flags(&doc.metadata, &opts.rules, opts.now);
                let text = render_document(&doc, &flags);
                let mut r = ExtractionResult::ready(item, text_units(split_to_budget(&text, budget)));
                r.rule_flags = flags;
                r
            }
            Err(e) => ExtractionResult::failed(item, format!("docx: {e}")),
        },
        EvidenceKind::Html => {
            let text = strip_html(&String::from_utf8_lossy(&bytes));
            ExtractionResult::ready(item, text_units(split_to_budget(&text, budget)))
        }
        EvidenceKind::PlainText => {
            ExtractionResult::ready(item, text_units(split_to_budget(&String::from_utf8_lossy(&bytes), budget)))
        }
        EvidenceKind::Audio => {
            let Some(ep) = &opts.asr else {
                return ExtractionResult::failed(item, "no transcription endpoint configured");
            };
            match transcribe_audio(&path, ep) {
                Ok(t) => ExtractionResult::ready(item, text_units(split_to_budget(&render_transcript(&t), budget))),
                Err(e) => ExtractionResult::failed(item, format!("transcription: {e}")),
            }
        }
        EvidenceKind::Image => match prepare_image_bytes(&bytes, opts.image_max_dim) {
            Ok(att) => ExtractionResult::ready(
                item,
                vec![ExtractionUnit {
                    chunk_ref: "image".into(),
                    label: "image".into(),
                    content: UnitContent::Media { caption: format!("Evidence image: {}", att.caption()), attachments: vec![att] },
                }],
            ),
            Err(e) => ExtractionResult::failed(item, e.to_string()),
        },
        EvidenceKind::Video => extract_video(item, &path, opts),
        EvidenceKind::Unknown => {
            let ext = extension(&item.path);
            match &opts.converter {
                Some(cfg) if cfg.extensions.iter().any(|e| e.eq_ignore_ascii_case(&ext)) => match run_converter(cfg, &path) {
                    Ok(text) => {
                        let mut r = ExtractionResult::ready(item, text_units(split_to_budget(&text, budget)));
                        r.notes.push(format!("converted by external command for .{ext}"));
                        r
                    }
                    Err(e) => ExtractionResult::failed(item, e),
                },
                _ => {
                    let mut r = ExtractionResult::ready(item, Vec::new());
                    r.status = ExtractionStatus::UnknownKind;
                    r
                }
            }
        }
    }
}

fn extract_video(item: &EvidenceItem, path: &Path, opts: &ExtractOptions) -> ExtractionResult {
    let prepared = match prepare_video(path, &item.sha256, opts.video_max_duration_s) {
        Ok(p) => p.into_attachments(),
        Err(e) => return ExtractionResult::failed(item, e.to_string()),
    };
    let many = prepared.len() > 1;
    let mut units = Vec::with_capacity(prepared.len());
    for (i, att) in prepared.into_iter().enumerate() {
        let chunk_ref = if many { format!("segment-{:02}", i + 1) } else { "video".to_string() };
        let (start, end) = match &att.segment {
            Some(s) => (s.start_s, s.end_s),
            None => (0.0, att.duration_s.unwrap_or(0.0)),
        };
        let caption = format!("Evidence video: {}", att.caption());
        let attachments = match &opts.video_mode {
            VideoMode::Native => vec![att],
            VideoMode::Frames { command } => {
                let scratch = opts.scratch_dir.join(&item.id).join(&chunk_ref);
                match sample_frames(command, path, &frame_times(start, end), &scratch, opts.image_max_dim) {
                    Ok(frames) => frames,
                    Err(e) => return ExtractionResult::failed(item, e.to_string()),
                }
            }
            VideoMode::Unavailable => {
                return ExtractionResult::failed(item, "endpoint lacks native video and no frame command is configured")
            }
        };
        let caption = match &opts.video_mode {
            VideoMode::Frames { .. } => format!("{caption}; {} frames sampled between {start:.1}s and {end:.1}s", attachments.len()),
            _ => caption,
        };
        units.push(ExtractionUnit { label: chunk_ref.clone(), chunk_ref, content: UnitContent::Media { caption, attachments } });
    }
    ExtractionResult::ready(item, units)
}
