//! Output workspace layout. Nothing here ever touches the evidence root.

use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::extract::ExtractionSummary;
use crate::ingest::Manifest;
use crate::triage::RunStore;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const CONFIG_FILE: &str = "config";
pub const CASE_FILE: &str = "case.toml";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("workspace {workspace} lies inside evidence root {evidence_root}")]
    InsideEvidence { workspace: PathBuf, evidence_root: PathBuf },
    #[error("workspace {0} already holds a manifest")]
    AlreadyScanned(PathBuf),
    #[error("workspace {0} has no manifest; run scan first")]
    NotScanned(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io { path: path.to_path_buf(), source }
}

/// Canonical form of a path that may not exist yet: the deepest existing
/// ancestor is canonicalized and the remainder appended.
pub fn canonical_lenient(path: &Path) -> io::Result<PathBuf> {
    let abs = if path.is_absolute() { path.to_path_buf() } else { std::env::current_dir()?.join(path) };
    let mut existing = abs.as_path();
    let mut rest = Vec::new();
    loop {
        match existing.canonicalize() {
            Ok(c) => {
                let mut out = c;
                for part in rest.iter().rev() {
                    out.push(part);
                }
                return Ok(out);
            }
            Err(_) => {
                rest.push(existing.file_name().map(|n| n.to_os_string()).unwrap_or_default());
                existing = match existing.parent() {
                    Some(p) => p,
                    None => return Ok(abs),
                };
            }
        }
    }
}

/// Refuse a workspace located inside (or equal to) the evidence root.
pub fn ensure_outside(workspace: &Path, evidence_root: &Path) -> Result<(), WorkspaceError> {
    let ws = canonical_lenient(workspace).map_err(io_err(workspace))?;
    let ev = canonical_lenient(evidence_root).map_err(io_err(evidence_root))?;
    if ws.starts_with(&ev) {
        return Err(WorkspaceError::InsideEvidence { workspace: ws, evidence_root: ev });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }
    pub fn ledger_path(&self) -> PathBuf {
        self.dir.join(LEDGER_FILE)
    }
    pub fn config_path(&self) -> PathBuf {
        self.dir.join(CONFIG_FILE)
    }
    pub fn case_path(&self) -> PathBuf {
        self.dir.join(CASE_FILE)
    }
    pub fn report_json_path(&self) -> PathBuf {
        self.dir.join(REPORT_JSON)
    }
    pub fn report_md_path(&self) -> PathBuf {
        self.dir.join(REPORT_MD)
    }
    pub fn runs_dir(&self) -> PathBuf {
        self.dir.join("runs")
    }
    pub fn extractions_dir(&self) -> PathBuf {
        self.dir.join("extractions")
    }
    pub fn scratch_dir(&self) -> PathBuf {
        self.dir.join("scratch")
    }

    pub fn run_store(&self) -> RunStore {
        RunStore::new(self.runs_dir())
    }

    pub fn create_dirs(&self) -> Result<(), WorkspaceError> {
        for d in [self.dir.clone(), self.runs_dir(), self.extractions_dir()] {
            std::fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        Ok(())
    }

    pub fn load_manifest(&self) -> Result<Manifest, WorkspaceError> {
        let path = self.manifest_path();
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(WorkspaceError::NotScanned(self.dir.clone())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        Manifest::from_json(&text).map_err(|e| WorkspaceError::Corrupt { path, message: e.to_string() })
    }

    pub fn save_manifest(&self, manifest: &Manifest) -> Result<(), WorkspaceError> {
        write_atomic(&self.manifest_path(), manifest.to_json().as_bytes())
    }

    pub fn extraction_path(&self, evidence_id: &str) -> PathBuf {
        self.extractions_dir().join(format!("{evidence_id}.json"))
    }

    pub fn save_extraction(&self, summary: &ExtractionSummary) -> Result<(), WorkspaceError> {
        let mut text = serde_json::to_string_pretty(summary).expect("summaries serialize");
        text.push('\n');
        write_atomic(&self.extraction_path(&summary.evidence_id), text.as_bytes())
    }

    pub fn load_extraction(&self, evidence_id: &str) -> Option<ExtractionSummary> {
        let text = std::fs::read_to_string(self.extraction_path(evidence_id)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

/// Write to a sibling temporary file, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), WorkspaceError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}
