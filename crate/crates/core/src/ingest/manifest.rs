use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{self, Read};
use std::path::{Component, Path, PathBuf};
use thiserror::Error;

use super::kind::{detect_kind, EvidenceKind, SNIFF_LEN};
use super::ledger::{CustodyAction, CustodyLedger, LedgerError};
use crate::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ItemStatus {
    Registered,
    /// Symbolic link; never followed. The hash covers the link target text.
    Symlink { target: String },
    /// Could not be read at scan time. The hash is a placeholder derived
    /// from the path, not from content.
    Unreadable { note: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub id: String,
    /// Relative to the evidence root, `/`-separated.
    pub path: String,
    pub kind: EvidenceKind,
    pub size_bytes: u64,
    pub sha256: String,
    pub detected_at: DateTime<Utc>,
    pub status: ItemStatus,
}

impl EvidenceItem {
    /// Absolute location under `root`, refusing anything that would escape it.
    pub fn resolve(&self, root: &Path) -> Option<PathBuf> {
        let rel = Path::new(&self.path);
        rel.components()
            .all(|c| matches!(c, Component::Normal(_)))
            .then(|| root.join(rel))
    }

    pub fn is_readable(&self) -> bool {
        matches!(self.status, ItemStatus::Registered)
    }
}

/// Evidence id for a content hash.
pub fn evidence_id(sha256: &str) -> String {
    sha256[..16].to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub evidence_root: PathBuf,
    pub created_at: DateTime<Utc>,
    pub case_ref: String,
    pub items: Vec<EvidenceItem>,
}

impl Manifest {
    pub fn item(&self, id: &str) -> Option<&EvidenceItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("evidence root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("cannot list directory {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

enum Entry {
    File(PathBuf),
    Symlink(PathBuf),
    Unlistable(PathBuf, io::Error),
}

fn collect_entries(dir: &Path, out: &mut Vec<Entry>) {
    let read = match std::fs::read_dir(dir) {
        Ok(r) => r,
        Err(e) => {
            out.push(Entry::Unlistable(dir.to_path_buf(), e));
            return;
        }
    };
    for entry in read {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                out.push(Entry::Unlistable(dir.to_path_buf(), e));
                continue;
            }
        };
        let path = entry.path();
        match entry.file_type() {
            Ok(ft) if ft.is_symlink() => out.push(Entry::Symlink(path)),
            Ok(ft) if ft.is_dir() => collect_entries(&path, out),
            Ok(ft) if ft.is_file() => out.push(Entry::File(path)),
            // Sockets, fifos and devices are not evidence files.
            Ok(_) => {}
            Err(e) => out.push(Entry::Unlistable(path, e)),
        }
    }
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Hash a file opened read-only; returns (sha256, size, sniff prefix).
pub fn hash_file(path: &Path) -> io::Result<(String, u64, Vec<u8>)> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut prefix = Vec::with_capacity(SNIFF_LEN);
    let mut buf = vec![0u8; 64 * 1024];
    let mut size = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        if prefix.len() < SNIFF_LEN {
            let take = (SNIFF_LEN - prefix.len()).min(n);
            prefix.extend_from_slice(&buf[..take]);
        }
        hasher.update(&buf[..n]);
        size += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), size, prefix))
}

fn unreadable_item(rel: String, note: String, now: DateTime<Utc>) -> EvidenceItem {
    let sha256 = sha256_hex(format!("unreadable:{rel}").as_bytes());
    EvidenceItem {
        id: evidence_id(&sha256),
        path: rel,
        kind: EvidenceKind::Unknown,
        size_bytes: 0,
        sha256,
        detected_at: now,
        status: ItemStatus::Unreadable { note },
    }
}

fn link_target(path: &Path) -> io::Result<String> {
    Ok(std::fs::read_link(path)?.to_string_lossy().into_owned())
}

fn register(root: &Path, entry: Entry) -> EvidenceItem {
    let now = Utc::now();
    match entry {
        Entry::File(path) => {
            let rel = relative(root, &path);
            match hash_file(&path) {
                Ok((sha256, size_bytes, prefix)) => {
                    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    EvidenceItem {
                        id: evidence_id(&sha256),
                        kind: detect_kind(&prefix, &name),
                        path: rel,
                        size_bytes,
                        sha256,
                        detected_at: now,
                        status: ItemStatus::Registered,
                    }
                }
                Err(e) => unreadable_item(rel, format!("read failed: {e}"), now),
            }
        }
        Entry::Symlink(path) => {
            let rel = relative(root, &path);
            match link_target(&path) {
                Ok(target) => {
                    let sha256 = sha256_hex(target.as_bytes());
                    EvidenceItem {
                        id: evidence_id(&sha256),
                        path: rel,
                        kind: EvidenceKind::Unknown,
                        size_bytes: target.len() as u64,
                        sha256,
                        detected_at: now,
                        status: ItemStatus::Symlink { target },
                    }
                }
                Err(e) => unreadable_item(rel, format!("readlink failed: {e}"), now),
            }
        }
        Entry::Unlistable(path, e) => unreadable_item(relative(root, &path), format!("listing failed: {e}"), now),
    }
}

/// Walk `root` read-only and register every regular file.
///
/// Files are hashed on the rayon pool; ledger appends happen afterwards,
/// in path order, from this thread.
pub fn walk_evidence(
    root: &Path,
    ledger: &mut CustodyLedger,
    case_ref: &str,
    actor: &str,
) -> Result<Manifest, IngestError> {
    let meta = std::fs::metadata(root).map_err(|_| IngestError::RootNotFound(root.to_path_buf()))?;
    if !meta.is_dir() {
        return Err(IngestError::RootNotFound(root.to_path_buf()));
    }
    let root = root
        .canonicalize()
        .map_err(|source| IngestError::Io { path: root.to_path_buf(), source })?;
    let mut entries = Vec::new();
    collect_entries(&root, &mut entries);
    let mut items: Vec<EvidenceItem> = entries.into_par_iter().map(|e| register(&root, e)).collect();
    items.sort_by(|a, b| a.path.cmp(&b.path));
    items.dedup_by(|a, b| a.path == b.path);
    for item in &items {
        ledger.append(CustodyAction::Registered, &item.id, &item.sha256, actor)?;
    }
    Ok(Manifest { evidence_root: root, created_at: Utc::now(), case_ref: case_ref.to_string(), items })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ActualContent {
    Missing { detail: String },
    Sha256 { sha256: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub path: String,
    pub expected_sha256: String,
    pub actual: ActualContent,
}

fn recheck(root: &Path, item: &EvidenceItem) -> Option<Mismatch> {
    let mismatch = |actual| Some(Mismatch { path: item.path.clone(), expected_sha256: item.sha256.clone(), actual });
    let Some(path) = item.resolve(root) else {
        return mismatch(ActualContent::Missing { detail: "path escapes evidence root".into() });
    };
    match &item.status {
        ItemStatus::Registered => match hash_file(&path) {
            Ok((sha, _, _)) if sha == item.sha256 => None,
            Ok((sha256, _, _)) => mismatch(ActualContent::Sha256 { sha256 }),
            Err(e) => mismatch(ActualContent::Missing { detail: e.to_string() }),
        },
        ItemStatus::Symlink { .. } => match link_target(&path) {
            Ok(t) if sha256_hex(t.as_bytes()) == item.sha256 => None,
            Ok(t) => mismatch(ActualContent::Sha256 { sha256: sha256_hex(t.as_bytes()) }),
            Err(e) => mismatch(ActualContent::Missing { detail: e.to_string() }),
        },
        // Content was never hashed; only presence can be checked.
        ItemStatus::Unreadable { .. } => match std::fs::symlink_metadata(&path) {
            Ok(_) => None,
            Err(e) => mismatch(ActualContent::Missing { detail: e.to_string() }),
        },
    }
}

/// Re-hash every manifest item; an empty result means the corpus is intact.
/// Appends one corpus-wide `Verified` record.
pub fn verify_untouched(
    manifest: &Manifest,
    ledger: &mut CustodyLedger,
    actor: &str,
) -> Result<Vec<Mismatch>, LedgerError> {
    let mut mismatches: Vec<Mismatch> = manifest
        .items
        .par_iter()
        .filter_map(|item| recheck(&manifest.evidence_root, item))
        .collect();
    mismatches.sort_by(|a, b| a.path.cmp(&b.path));
    ledger.append(CustodyAction::Verified, "*", "-", actor)?;
    Ok(mismatches)
}
