//! Evidence intake: read-only walking, kind detection, hashing and the
//! custody ledger.

pub mod kind;
pub mod ledger;
pub mod manifest;

pub use kind::{detect_kind, EvidenceKind};
pub use ledger::{
    ledger_verify, read_records, verify_bytes, BreakReason, CustodyAction, CustodyLedger, CustodyRecord, LedgerError, VerifyOutcome,
    GENESIS_HASH,
};
pub use manifest::{
    evidence_id, verify_untouched, walk_evidence, ActualContent, EvidenceItem, IngestError, ItemStatus, Manifest,
    Mismatch,
};
