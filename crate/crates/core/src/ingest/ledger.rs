//! Append-only custody ledger.
//!
//! One JSON object per line, fields in a fixed order. Each record's hash is
//! the SHA-256 of its own line serialized with `record_hash` set to `""`,
//! and each record stores the hash of its predecessor, so any edit to a line
//! breaks either that record's hash or the next record's link.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::sha256_hex;

/// Previous-record hash used by the genesis record.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CustodyAction {
    Registered,
    Extracted,
    Analyzed,
    Reported,
    Verified,
}

/// Field order here is the on-disk order; do not reorder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustodyRecord {
    pub seq: u64,
    pub timestamp: String,
    pub actor: String,
    pub action: CustodyAction,
    pub evidence_id: String,
    pub evidence_sha256: String,
    pub prev_record_hash: String,
    pub record_hash: String,
}

impl CustodyRecord {
    /// The line serialization with `record_hash` blanked; the hash preimage.
    pub fn canonical_preimage(&self) -> String {
        let mut blank = self.clone();
        blank.record_hash.clear();
        serde_json::to_string(&blank).expect("record serializes")
    }

    pub fn compute_hash(&self) -> String {
        sha256_hex(self.canonical_preimage().as_bytes())
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreakReason {
    /// Line is not a well-formed record.
    Unparseable,
    SeqGap { expected: u64, found: u64 },
    LinkMismatch,
    HashMismatch,
    /// Parses and hashes correctly but is not in canonical byte form.
    NonCanonical,
    /// Trailing bytes without a terminating newline.
    IncompleteTail,
}

impl fmt::Display for BreakReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BreakReason::Unparseable => f.write_str("unparseable record"),
            BreakReason::SeqGap { expected, found } => write!(f, "sequence gap (expected {expected}, found {found})"),
            BreakReason::LinkMismatch => f.write_str("prev_record_hash does not match predecessor"),
            BreakReason::HashMismatch => f.write_str("record_hash mismatch"),
            BreakReason::NonCanonical => f.write_str("non-canonical serialization"),
            BreakReason::IncompleteTail => f.write_str("incomplete trailing record"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyOutcome {
    Ok { records: u64, head: Option<String> },
    BrokenAt { seq: u64, reason: BreakReason },
}

impl VerifyOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, VerifyOutcome::Ok { .. })
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("custody ledger corrupt at record {seq}: {reason}")]
    Corrupt { seq: u64, reason: BreakReason },
    #[error("custody ledger i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Verify a ledger held in memory. Reports the first breakage.
pub fn verify_bytes(bytes: &[u8]) -> VerifyOutcome {
    let mut prev = GENESIS_HASH.to_string();
    let mut seq: u64 = 0;
    let mut rest = bytes;
    while !rest.is_empty() {
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return VerifyOutcome::BrokenAt { seq, reason: BreakReason::IncompleteTail };
        };
        let line = &rest[..nl];
        rest = &rest[nl + 1..];
        let record = match std::str::from_utf8(line)
            .ok()
            .and_then(|s| serde_json::from_str::<CustodyRecord>(s).ok().map(|r| (s, r)))
        {
            Some((text, record)) => {
                if record.seq != seq {
                    return VerifyOutcome::BrokenAt {
                        seq,
                        reason: BreakReason::SeqGap { expected: seq, found: record.seq },
                    };
                }
                if record.prev_record_hash != prev {
                    return VerifyOutcome::BrokenAt { seq, reason: BreakReason::LinkMismatch };
                }
                if record.compute_hash() != record.record_hash {
                    return VerifyOutcome::BrokenAt { seq, reason: BreakReason::HashMismatch };
                }
                if record.to_line() != text {
                    return VerifyOutcome::BrokenAt { seq, reason: BreakReason::NonCanonical };
                }
                record
            }
            None => return VerifyOutcome::BrokenAt { seq, reason: BreakReason::Unparseable },
        };
        prev = record.record_hash;
        seq += 1;
    }
    let head = (seq > 0).then_some(prev);
    VerifyOutcome::Ok { records: seq, head }
}

/// Verify the ledger file at `path`. A missing file is an empty ledger.
pub fn ledger_verify(path: &Path) -> Result<VerifyOutcome, LedgerError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(verify_bytes(&bytes)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(VerifyOutcome::Ok { records: 0, head: None }),
        Err(source) => Err(LedgerError::Io { path: path.to_path_buf(), source }),
    }
}

/// Length of the tail a crashed append may have left, if any.
///
/// A torn write is a strict prefix of a record line, so it can never contain
/// the closing `"record_hash":"<64 hex>"}`. Anything that does is a complete
/// record with a damaged terminator and is left for verification to flag.
fn torn_tail_len(bytes: &[u8]) -> usize {
    let start = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let tail = &bytes[start..];
    if tail.is_empty() {
        return 0;
    }
    const KEY: &[u8] = b"\"record_hash\":\"";
    let complete = tail.windows(KEY.len()).enumerate().any(|(i, w)| {
        w == KEY && {
            let after = &tail[i + KEY.len()..];
            after.len() >= 66 && after[..64].iter().all(u8::is_ascii_hexdigit) && &after[64..66] == b"\"}"
        }
    });
    if complete {
        0
    } else {
        tail.len()
    }
}

/// Single-writer handle on a ledger file.
#[derive(Debug)]
pub struct CustodyLedger {
    path: PathBuf,
    file: File,
    next_seq: u64,
    head: Option<String>,
}

impl CustodyLedger {
    /// Open (creating if absent) and verify the ledger. A torn trailing
    /// record from an interrupted append is discarded; any other breakage is
    /// `Corrupt`.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LedgerError> {
        let path = path.into();
        let io_err = |source| LedgerError::Io { path: path.clone(), source };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err)?;
        let torn = torn_tail_len(&bytes);
        if torn > 0 {
            bytes.truncate(bytes.len() - torn);
            file.set_len(bytes.len() as u64).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        }
        match verify_bytes(&bytes) {
            VerifyOutcome::Ok { records, head } => Ok(Self { path, file, next_seq: records, head }),
            VerifyOutcome::BrokenAt { seq, reason } => Err(LedgerError::Corrupt { seq, reason }),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.next_seq == 0
    }

    /// `record_hash` of the latest record.
    pub fn head(&self) -> Option<&str> {
        self.head.as_deref()
    }

    /// Append one record. The line is written with a single `write_all`
    /// followed by a data sync.
    pub fn append(
        &mut self,
        action: CustodyAction,
        evidence_id: &str,
        evidence_sha256: &str,
        actor: &str,
    ) -> Result<CustodyRecord, LedgerError> {
        let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true);
        self.append_at(timestamp, action, evidence_id, evidence_sha256, actor)
    }

    pub(crate) fn append_at(
        &mut self,
        timestamp: String,
        action: CustodyAction,
        evidence_id: &str,
        evidence_sha256: &str,
        actor: &str,
    ) -> Result<CustodyRecord, LedgerError> {
        let mut record = CustodyRecord {
            seq: self.next_seq,
            timestamp,
            actor: actor.to_string(),
            action,
            evidence_id: evidence_id.to_string(),
            evidence_sha256: evidence_sha256.to_string(),
            prev_record_hash: self.head.clone().unwrap_or_else(|| GENESIS_HASH.to_string()),
            record_hash: String::new(),
        };
        record.record_hash = record.compute_hash();
        let mut line = record.to_line();
        line.push('\n');
        let io_err = |source| LedgerError::Io { path: self.path.clone(), source };
        self.file.write_all(line.as_bytes()).map_err(io_err)?;
        self.file.sync_data().map_err(io_err)?;
        self.next_seq += 1;
        self.head = Some(record.record_hash.clone());
        Ok(record)
    }

    /// Re-read and verify the file on disk.
    pub fn verify(&self) -> Result<VerifyOutcome, LedgerError> {
        ledger_verify(&self.path)
    }
}

/// Parse all records of a ledger file without verifying the chain.
pub fn read_records(path: &Path) -> Result<Vec<CustodyRecord>, LedgerError> {
    let text = std::fs::read_to_string(path).map_err(|source| LedgerError::Io { path: path.to_path_buf(), source })?;
    Ok(text
        .lines()
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect())
}
