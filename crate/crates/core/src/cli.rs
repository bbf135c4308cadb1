//! The `scout` command surface.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 verification
//! failure (changed evidence or broken ledger), 3 environment error.

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::config::{select_profiles, CaseFile, Config, ConfigError};
use crate::extract::{extract_item, ExtractOptions, ExtractionResult, ExtractionStatus, VideoMode};
use crate::gateway::{usable_budget, ChatMessage, ChatRequest, Gateway, ModelProfile, TokenBudget};
use crate::ingest::{
    ledger_verify, walk_evidence, ActualContent, CustodyAction, CustodyLedger, EvidenceItem, EvidenceKind, LedgerError,
    Manifest, VerifyOutcome, GENESIS_HASH,
};
use crate::report::{build_report, render_json, render_markdown, ItemAnalysis};
use crate::triage::{analyze_evidence, system_prompt, AnalysisEnv, CaseContext, ParseStatus};
use crate::workspace::{ensure_outside, write_atomic, Workspace, WorkspaceError};
use crate::{actor, sha256_hex};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_ENV: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "scout", version, about = "Read-only evidence triage with a hash-chained custody ledger")]
struct Cli {
    /// Output workspace (never inside the evidence root).
    #[arg(long, global = true, env = "SCOUT_WORKSPACE")]
    workspace: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Walk and hash the evidence tree, writing the manifest and ledger.
    Scan {
        evidence_root: PathBuf,
        /// Case file (TOML) with context and model selection.
        #[arg(long)]
        case: PathBuf,
        /// Configuration file to copy into the workspace.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract every manifest item and collect model verdicts.
    Analyze {
        /// Repetitions per chunk and profile (overrides the case file).
        #[arg(long)]
        runs: Option<u32>,
        /// Profiles to use for every kind (overrides the case file).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        models: Option<Vec<String>>,
    },
    /// Write the ranked report.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// Check the ledger chain and re-hash the evidence.
    Verify,
    /// Model endpoint utilities.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
}

#[derive(Debug, Subcommand)]
enum ModelsAction {
    /// Send one trivial request to every configured profile.
    Ping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Md,
    Both,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(m: impl std::fmt::Display) -> Self {
        Self { code: EXIT_USAGE, message: m.to_string() }
    }
    fn env(m: impl std::fmt::Display) -> Self {
        Self { code: EXIT_ENV, message: m.to_string() }
    }
    fn verify(m: impl std::fmt::Display) -> Self {
        Self { code: EXIT_VERIFY, message: m.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::env(e),
            _ => Failure::usage(e),
        }
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Corrupt { .. } => Failure::verify(e),
            LedgerError::Io { .. } => Failure::env(e),
        }
    }
}

impl From<WorkspaceError> for Failure {
    fn from(e: WorkspaceError) -> Self {
        match e {
            WorkspaceError::Io { .. } => Failure::env(e),
            _ => Failure::usage(e),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Parse `argv` and run; returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`run_command`], writing to the given streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let Some(ws_dir) = cli.workspace.clone() else {
        let _ = writeln!(err, "error: --workspace is required (or set SCOUT_WORKSPACE)");
        return EXIT_USAGE;
    };
    let ws = Workspace::new(ws_dir);
    let result = match cli.command {
        Command::Scan { evidence_root, case, config } => scan(&ws, &evidence_root, &case, config.as_deref(), out),
        Command::Analyze { runs, models } => analyze(&ws, runs, models.as_deref(), out, err),
        Command::Report { format } => report(&ws, format, out),
        Command::Verify => verify(&ws, out),
        Command::Models { action: ModelsAction::Ping } => ping(&ws, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn scan(ws: &Workspace, root: &Path, case_path: &Path, config_path: Option<&Path>, out: &mut dyn Write) -> Outcome {
    if !root.is_dir() {
        return Err(Failure::usage(format!("evidence root not found: {}", root.display())));
    }
    ensure_outside(ws.dir(), root)?;
    if ws.manifest_path().exists() {
        return Err(WorkspaceError::AlreadyScanned(ws.dir().to_path_buf()).into());
    }
    let case_text = std::fs::read_to_string(case_path)
        .map_err(|e| Failure::usage(format!("reading case file {}: {e}", case_path.display())))?;
    let case = CaseFile::parse(&case_text, &case_path.display().to_string())?;
    let config_text = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("reading {}: {e}", p.display())))?;
            Config::parse(&text, &p.display().to_string())?;
            Some(text)
        }
        None if ws.config_path().exists() => {
            Config::load(&ws.config_path())?;
            None
        }
        None => Some(Config::default().to_toml()),
    };
    ws.create_dirs()?;
    if let Some(text) = config_text {
        write_atomic(&ws.config_path(), text.as_bytes())?;
    }
    write_atomic(&ws.case_path(), case_text.as_bytes())?;
    let mut ledger = CustodyLedger::open(ws.ledger_path())?;
    let manifest = walk_evidence(root, &mut ledger, &case.case.id, &actor()).map_err(|e| match e {
        crate::ingest::IngestError::Ledger(l) => Failure::from(l),
        crate::ingest::IngestError::RootNotFound(_) => Failure::usage(e),
        other => Failure::env(other),
    })?;
    ws.save_manifest(&manifest)?;
    let mut counts: BTreeMap<EvidenceKind, usize> = BTreeMap::new();
    for i in &manifest.items {
        *counts.entry(i.kind).or_default() += 1;
    }
    let kinds: Vec<String> = counts.iter().map(|(k, n)| format!("{k} {n}")).collect();
    let _ = writeln!(out, "registered {} items ({})", manifest.items.len(), kinds.join(", "));
    let _ = writeln!(out, "manifest: {}", ws.manifest_path().display());
    Ok(())
}

struct Loaded {
    manifest: Manifest,
    config: Config,
    case: CaseFile,
    ctx: CaseContext,
}

fn load(ws: &Workspace) -> Result<Loaded, Failure> {
    let manifest = ws.load_manifest()?;
    let config = Config::load(&ws.config_path())?;
    let case = CaseFile::load(&ws.case_path())?;
    let ctx = case.context()?;
    Ok(Loaded { manifest, config, case, ctx })
}

/// Items grouped by evidence id; identical content is analyzed once.
fn unique_by_id(items: &[EvidenceItem]) -> Vec<&EvidenceItem> {
    let mut seen = std::collections::HashSet::new();
    items.iter().filter(|i| seen.insert(i.id.as_str())).collect()
}

fn text_budget(kind: EvidenceKind, ctx: &CaseContext, profiles: &[&ModelProfile]) -> Result<TokenBudget, String> {
    let template = system_prompt(kind, ctx);
    let fallback;
    let candidates: Vec<&ModelProfile> = if profiles.is_empty() {
        fallback = ModelProfile::text_default("default", "-");
        vec![&fallback]
    } else {
        profiles.to_vec()
    };
    let mut best: Option<TokenBudget> = None;
    for p in candidates {
        let b = usable_budget(p, &template).map_err(|e| e.to_string())?;
        best = Some(best.map_or(b, |x| if b.tokens() < x.tokens() { b } else { x }));
    }
    Ok(best.expect("at least one candidate"))
}

fn video_mode(config: &Config, profiles: &[&ModelProfile]) -> VideoMode {
    if profiles.iter().all(|p| p.native_video) {
        VideoMode::Native
    } else if let Some(cmd) = &config.media.frame_command {
        VideoMode::Frames { command: cmd.clone() }
    } else {
        VideoMode::Unavailable
    }
}

fn run_set_complete(ws: &Workspace, item: &EvidenceItem, profiles: &[&ModelProfile], n: u32) -> bool {
    let Some(summary) = ws.load_extraction(&item.id) else {
        return false;
    };
    if summary.status != ExtractionStatus::Ready {
        return false;
    }
    let store = ws.run_store();
    summary.chunk_refs.iter().all(|c| {
        profiles.iter().all(|p| (0..n).all(|rep| store.load(&item.id, &p.name, c, rep).is_some_and(|r| r.is_complete())))
    })
}

#[derive(Default)]
struct Tally {
    items: usize,
    skipped: usize,
    failed: usize,
    runs: usize,
    degraded: usize,
    unavailable: usize,
}

fn analyze(
    ws: &Workspace,
    runs: Option<u32>,
    models: Option<&[String]>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    let Loaded { manifest, config, case, ctx } = load(ws)?;
    let n = runs.unwrap_or(case.runs_per_chunk);
    if n == 0 {
        return Err(Failure::usage("--runs must be at least 1"));
    }
    // Resolve profile selection up front so configuration errors stop the
    // run before any model call.
    let mut selection: BTreeMap<EvidenceKind, Vec<&ModelProfile>> = BTreeMap::new();
    for kind in EvidenceKind::ALL {
        selection.insert(kind, select_profiles(&config, &case, kind, models)?);
    }
    let ledger = Mutex::new(CustodyLedger::open(ws.ledger_path())?);
    let gateway = Gateway::http(config.gateway.max_concurrent, config.gateway.backoff_base());
    let store = ws.run_store();
    let actor = actor();
    let env = AnalysisEnv { ctx: &ctx, gateway: &gateway, store: &store, ledger: &ledger, actor: &actor };
    let base_opts = ExtractOptions {
        rules: config.rules.clone(),
        now: chrono::Utc::now(),
        image_max_dim: config.media.image_max_dim,
        video_max_duration_s: config.media.video_max_duration_s,
        video_mode: VideoMode::Native,
        asr: config.asr.as_ref().map(|a| a.endpoint()),
        converter: config.converter(),
        scratch_dir: ws.scratch_dir(),
    };
    let tally = Mutex::new(Tally::default());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.gateway.max_concurrent.max(1))
        .build()
        .map_err(Failure::env)?;
    let result: Result<(), Failure> = pool.install(|| {
        unique_by_id(&manifest.items).into_par_iter().try_for_each(|item| {
            let profiles = &selection[&item.kind];
            if run_set_complete(ws, item, profiles, n) {
                let mut t = tally.lock().unwrap_or_else(|e| e.into_inner());
                t.items += 1;
                t.skipped += 1;
                return Ok(());
            }
            let extraction = match text_budget(item.kind, &ctx, profiles) {
                Ok(budget) => {
                    let mut opts = base_opts.clone();
                    if item.kind == EvidenceKind::Video {
                        opts.video_mode = video_mode(&config, profiles);
                    }
                    extract_item(item, &manifest.evidence_root, budget, &opts)
                }
                Err(reason) => ExtractionResult {
                    evidence_id: item.id.clone(),
                    kind: item.kind,
                    status: ExtractionStatus::Failed { reason: reason.clone() },
                    units: vec![],
                    rule_flags: vec![crate::text::RuleFlag::unprocessable(&reason)],
                    notes: vec![],
                },
            };
            ledger
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .append(CustodyAction::Extracted, &item.id, &item.sha256, &actor)?;
            ws.save_extraction(&extraction.summary(&item.path))?;
            let runs = if extraction.status == ExtractionStatus::Ready {
                analyze_evidence(item, &extraction, profiles, n, &env).map_err(|e| match e {
                    crate::triage::AnalyzeError::Ledger(l) => Failure::from(l),
                    other => Failure::env(other),
                })?
            } else {
                Vec::new()
            };
            let mut t = tally.lock().unwrap_or_else(|e| e.into_inner());
            t.items += 1;
            t.failed += usize::from(matches!(extraction.status, ExtractionStatus::Failed { .. }));
            t.runs += runs.len();
            t.degraded += runs.iter().filter(|r| r.verdict.parse_status == ParseStatus::Degraded).count();
            t.unavailable += runs.iter().filter(|r| !r.is_complete()).count();
            Ok(())
        })
    });
    result?;
    let t = tally.into_inner().unwrap_or_else(|e| e.into_inner());
    let _ = writeln!(
        out,
        "analyzed {} unique items ({} already complete, {} extraction failures): {} runs, {} degraded",
        t.items, t.skipped, t.failed, t.runs, t.degraded
    );
    if t.unavailable > 0 {
        let _ = writeln!(err, "warning: {} runs got no model response; rerun analyze to retry them", t.unavailable);
    }
    Ok(())
}

fn collect_analyses(ws: &Workspace, manifest: &Manifest) -> Result<Vec<ItemAnalysis>, Failure> {
    let store = ws.run_store();
    manifest
        .items
        .iter()
        .map(|item| {
            let extraction = ws.load_extraction(&item.id);
            let runs = store.runs_for(&item.id).map_err(Failure::env)?;
            Ok(ItemAnalysis { extraction, runs })
        })
        .collect()
}

fn report(ws: &Workspace, format: Format, out: &mut dyn Write) -> Outcome {
    let Loaded { manifest, ctx, .. } = load(ws)?;
    let mut ledger = CustodyLedger::open(ws.ledger_path())?;
    let analyses = collect_analyses(ws, &manifest)?;
    let head = ledger.head().unwrap_or(GENESIS_HASH).to_string();
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let report = build_report(&ctx, &manifest, &analyses, &head, &timestamp, &actor());
    let json = render_json(&report);
    let md = render_markdown(&report);
    let mut bound = None;
    if matches!(format, Format::Json | Format::Both) {
        write_atomic(&ws.report_json_path(), json.as_bytes())?;
        bound = Some(sha256_hex(json.as_bytes()));
        let _ = writeln!(out, "wrote {}", ws.report_json_path().display());
    }
    if matches!(format, Format::Md | Format::Both) {
        write_atomic(&ws.report_md_path(), md.as_bytes())?;
        bound.get_or_insert_with(|| sha256_hex(md.as_bytes()));
        let _ = writeln!(out, "wrote {}", ws.report_md_path().display());
    }
    ledger.append(CustodyAction::Reported, "*", bound.as_deref().unwrap_or("-"), &actor())?;
    Ok(())
}

fn verify(ws: &Workspace, out: &mut dyn Write) -> Outcome {
    let manifest = ws.load_manifest()?;
    match ledger_verify(&ws.ledger_path())? {
        VerifyOutcome::Ok { .. } => {}
        VerifyOutcome::BrokenAt { seq, reason } => {
            let _ = writeln!(out, "ledger broken at seq {seq}: {reason}");
            return Err(Failure::verify("custody ledger verification failed"));
        }
    }
    let mut ledger = CustodyLedger::open(ws.ledger_path())?;
    let mismatches = crate::ingest::verify_untouched(&manifest, &mut ledger, &actor())?;
    for m in &mismatches {
        let actual = match &m.actual {
            ActualContent::Missing { detail } => format!("missing ({detail})"),
            ActualContent::Sha256 { sha256 } => format!("sha256 {sha256}"),
        };
        let _ = writeln!(out, "MISMATCH {}: expected sha256 {}, found {actual}", m.path, m.expected_sha256);
    }
    if !mismatches.is_empty() {
        return Err(Failure::verify(format!("{} evidence file(s) differ from the manifest", mismatches.len())));
    }
    let _ = writeln!(out, "ok: {} items intact, ledger of {} records verified", manifest.items.len(), ledger.len());
    Ok(())
}

fn ping(ws: &Workspace, out: &mut dyn Write) -> Outcome {
    let config = Config::load(&ws.config_path())?;
    if config.profiles.is_empty() {
        return Err(Failure::usage("no model profiles configured"));
    }
    let gateway = Gateway::http(config.gateway.max_concurrent, config.gateway.backoff_base());
    let mut failures = 0;
    for p in config.profiles.values() {
        let req = ChatRequest {
            profile: p.name.clone(),
            messages: vec![ChatMessage::system("Connectivity check."), ChatMessage::user("Reply with the single word: ok")],
        };
        match gateway.chat_complete(p, &req) {
            Ok(r) => {
                let _ = writeln!(out, "{}: ok ({} ms, {} attempt(s))", p.name, r.latency_ms, r.attempt_count);
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(out, "{}: FAILED {e}", p.name);
            }
        }
    }
    if failures > 0 {
        return Err(Failure::env(format!("{failures} profile(s) unreachable")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(std::iter::once("scout").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run(&["report", "--format", "pdf", "--workspace", "/tmp/x"]).0, EXIT_USAGE);
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("scan"));
    }

    #[test]
    fn unscanned_workspace() {
        let ws = tempfile::tempdir().unwrap();
        let (code, _, err) = run(&["verify", "--workspace", ws.path().to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("run scan first"));
    }
}
