//! Scout: read-only triage of seized evidence files.
//!
//! The pipeline walks an evidence tree without modifying it, records every
//! interaction in a hash-chained custody ledger, turns each file into
//! model-ready text or media attachments, asks one or more chat-completion
//! endpoints for a structured relevance verdict, and ranks the corpus so an
//! examiner knows where to start.
//!
//! Module map:
//!
//! - [`ingest`]: evidence walking, kind detection, hashing, custody ledger.
//! - [`pcap`]: classic pcap parsing and per-packet rendering.
//! - [`text`]: mbox/eml, docx, html extraction and metadata rules.
//! - [`media`]: image downscaling, video packaging, audio transcription.
//! - [`gateway`]: token budgeting and the chat-completion client.
//! - [`triage`]: prompts, verdict parsing, scoring, per-item analysis.
//! - [`report`]: ranked report assembly and rendering.
//! - [`cli`]: the `scout` command surface.

#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod extract;
pub mod gateway;
pub mod ingest;
pub mod media;
pub mod pcap;
pub mod report;
pub mod text;
pub mod triage;
pub mod workspace;

/// Tool version recorded in ledger actors and reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Actor string written into custody records.
pub fn actor() -> String {
    format!("scout/{TOOL_VERSION}")
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
