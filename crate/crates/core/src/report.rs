//! Ranked triage report assembly and rendering.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::extract::{ExtractionStatus, ExtractionSummary};
use crate::ingest::{EvidenceKind, Manifest};
use crate::text::{RuleFlag, Severity};
use crate::triage::{rank_corpus, score_evidence, AnalysisRun, CaseContext, ParseStatus, PriorityEntry};

/// Always present in every report; no setting removes them.
pub const CAVEATS: [&str; 3] = [
    "False negatives are expected: this triage can miss relevant material. Files that are not flagged or that rank low must still be analyzed.",
    "Model outputs are not evidence. Every finding must be verified by an examiner with approved forensic tools before it is relied on; unverified model findings are inadmissible or at best hard to admit.",
    "Scores come from probabilistic language models and can change between runs, models and prompt versions.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryStatus {
    Analyzed,
    ExtractionFailed,
    UnknownKind,
    /// Extracted, but no compatible model profile was selected.
    NoModel,
    /// No extraction recorded yet.
    NotAnalyzed,
}

impl EntryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryStatus::Analyzed => "analyzed",
            EntryStatus::ExtractionFailed => "extraction-failed",
            EntryStatus::UnknownKind => "unknown-kind",
            EntryStatus::NoModel => "no-model",
            EntryStatus::NotAnalyzed => "not-analyzed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub run_id: String,
    pub profile: String,
    pub chunk_ref: String,
    pub repetition: u32,
    pub relevance: u8,
    pub parse_status: ParseStatus,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFlag {
    pub label: String,
    pub severity: Severity,
    pub rationale: String,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub rank: usize,
    pub evidence_id: String,
    pub path: String,
    pub kind: EvidenceKind,
    pub status: EntryStatus,
    pub aggregate_score: f64,
    pub contributing_runs: Vec<String>,
    pub rule_flags: Vec<RuleFlag>,
    pub model_flags: Vec<ModelFlag>,
    pub findings: Vec<Finding>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_items: usize,
    pub analyzed: usize,
    pub extraction_failed: usize,
    pub unknown_kind: usize,
    pub no_model: usize,
    pub not_analyzed: usize,
}

/// Everything that varies between otherwise identical report builds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStamp {
    pub timestamp: String,
    /// `record_hash` of the latest custody record when the report was built.
    pub ledger_head: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub case: CaseContext,
    pub generated_at: GenerationStamp,
    pub corpus_stats: CorpusStats,
    pub entries: Vec<ReportEntry>,
    pub caveats: Vec<String>,
}

/// What the workspace knows about one manifest item.
#[derive(Debug, Clone)]
pub struct ItemAnalysis {
    pub extraction: Option<ExtractionSummary>,
    pub runs: Vec<AnalysisRun>,
}

fn status_of(a: &ItemAnalysis) -> EntryStatus {
    match &a.extraction {
        None => EntryStatus::NotAnalyzed,
        Some(x) => match x.status {
            ExtractionStatus::Failed { .. } => EntryStatus::ExtractionFailed,
            ExtractionStatus::UnknownKind => EntryStatus::UnknownKind,
            ExtractionStatus::Ready if a.runs.is_empty() && !x.chunk_refs.is_empty() => EntryStatus::NoModel,
            ExtractionStatus::Ready => EntryStatus::Analyzed,
        },
    }
}

/// Score, rank and assemble. `analyses` is parallel to `manifest.items`.
pub fn build_report(
    case: &CaseContext,
    manifest: &Manifest,
    analyses: &[ItemAnalysis],
    ledger_head: &str,
    timestamp: &str,
    tool_version: &str,
) -> Report {
    assert_eq!(manifest.items.len(), analyses.len(), "one analysis per manifest item");
    let mut stats = CorpusStats { total_items: manifest.items.len(), ..Default::default() };
    let mut priority = Vec::with_capacity(analyses.len());
    let mut details = std::collections::HashMap::new();
    for (item, a) in manifest.items.iter().zip(analyses) {
        let status = status_of(a);
        match status {
            EntryStatus::Analyzed => stats.analyzed += 1,
            EntryStatus::ExtractionFailed => stats.extraction_failed += 1,
            EntryStatus::UnknownKind => stats.unknown_kind += 1,
            EntryStatus::NoModel => stats.no_model += 1,
            EntryStatus::NotAnalyzed => stats.not_analyzed += 1,
        }
        let rule_flags = a.extraction.as_ref().map(|x| x.rule_flags.clone()).unwrap_or_default();
        let mut runs: Vec<&AnalysisRun> = a.runs.iter().collect();
        runs.sort_by(|x, y| {
            (&x.chunk_ref, &x.profile_name, x.repetition).cmp(&(&y.chunk_ref, &y.profile_name, y.repetition))
        });
        let mut contributing: Vec<String> = runs.iter().map(|r| r.run_id.clone()).collect();
        contributing.sort();
        priority.push(PriorityEntry {
            evidence_id: item.id.clone(),
            path: item.path.clone(),
            aggregate_score: score_evidence(runs.iter().map(|r| &r.verdict), &rule_flags),
            rank: 0,
            contributing_runs: contributing,
            rule_flags,
        });
        let model_flags = runs
            .iter()
            .flat_map(|r| {
                r.verdict.flags.iter().map(|f| ModelFlag {
                    label: f.label.clone(),
                    severity: f.severity,
                    rationale: f.rationale.clone(),
                    run_id: r.run_id.clone(),
                })
            })
            .collect::<Vec<_>>();
        let findings = runs
            .iter()
            .map(|r| Finding {
                run_id: r.run_id.clone(),
                profile: r.profile_name.clone(),
                chunk_ref: r.chunk_ref.clone(),
                repetition: r.repetition,
                relevance: r.verdict.relevance,
                parse_status: r.verdict.parse_status,
                summary: r.verdict.summary.clone(),
            })
            .collect::<Vec<_>>();
        let mut notes = a.extraction.as_ref().map(|x| x.notes.clone()).unwrap_or_default();
        if let ExtractionStatus::Failed { reason } = a.extraction.as_ref().map(|x| &x.status).unwrap_or(&ExtractionStatus::Ready) {
            notes.insert(0, format!("extraction failed: {reason}"));
        }
        details.insert(item.path.clone(), (item.kind, status, model_flags, findings, notes));
    }
    let entries = rank_corpus(priority)
        .into_iter()
        .map(|p| {
            let (kind, status, model_flags, findings, notes) = details.remove(&p.path).expect("entry for every path");
            ReportEntry {
                rank: p.rank,
                evidence_id: p.evidence_id,
                path: p.path,
                kind,
                status,
                aggregate_score: p.aggregate_score,
                contributing_runs: p.contributing_runs,
                rule_flags: p.rule_flags,
                model_flags,
                findings,
                notes,
            }
        })
        .collect();
    Report {
        tool_version: tool_version.to_string(),
        case: case.clone(),
        generated_at: GenerationStamp { timestamp: timestamp.to_string(), ledger_head: ledger_head.to_string() },
        corpus_stats: stats,
        entries,
        caveats: CAVEATS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Pretty JSON with struct-order keys and a trailing newline.
pub fn render_json(report: &Report) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize") + "\n"
}

pub fn parse_json(text: &str) -> serde_json::Result<Report> {
    serde_json::from_str(text)
}

fn cell(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|").replace(['\r', '\n'], " ")
}

fn fmt_score(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

/// Distinct flag labels, most severe first.
pub fn top_flags(e: &ReportEntry, limit: usize) -> Vec<String> {
    let mut all: Vec<(Severity, &str)> = e
        .rule_flags
        .iter()
        .map(|f| (f.severity, f.label.as_str()))
        .chain(e.model_flags.iter().map(|f| (f.severity, f.label.as_str())))
        .collect();
    all.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    let mut seen = Vec::new();
    for (sev, label) in all {
        if !seen.iter().any(|(_, l): &(Severity, &str)| *l == label) {
            seen.push((sev, label));
        }
    }
    seen.into_iter().take(limit).map(|(s, l)| format!("{l} ({s})")).collect()
}

pub fn render_markdown(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Triage report: {}\n", cell(&r.case.case_id));
    let _ = writeln!(s, "- Generated: {}", r.generated_at.timestamp);
    let _ = writeln!(s, "- Tool: {}", r.tool_version);
    let _ = writeln!(s, "- Custody ledger head: `{}`\n", r.generated_at.ledger_head);

    let _ = writeln!(s, "## Case\n");
    let _ = writeln!(s, "- Background: {}", if r.case.background.is_empty() { "(none)" } else { &r.case.background });
    let _ = writeln!(s, "- Keywords: {}", if r.case.keywords.is_empty() { "(none)".to_string() } else { r.case.keywords.join(", ") });
    if let Some(x) = &r.case.extra_instructions {
        let _ = writeln!(s, "- Examiner instructions: {x}");
    }

    let c = &r.corpus_stats;
    let _ = writeln!(s, "\n## Corpus\n");
    let _ = writeln!(s, "| Total | Analyzed | Extraction failed | Unknown kind | No model | Not analyzed |");
    let _ = writeln!(s, "|---:|---:|---:|---:|---:|---:|");
    let _ = writeln!(
        s,
        "| {} | {} | {} | {} | {} | {} |",
        c.total_items, c.analyzed, c.extraction_failed, c.unknown_kind, c.no_model, c.not_analyzed
    );

    let _ = writeln!(s, "\n## Ranking\n");
    let _ = writeln!(s, "| Rank | Score | Path | Kind | Top flags |");
    let _ = writeln!(s, "|---:|---:|---|---|---|");
    for e in &r.entries {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            e.rank,
            fmt_score(e.aggregate_score),
            cell(&e.path),
            e.kind,
            cell(&top_flags(e, 3).join(", "))
        );
    }

    let _ = writeln!(s, "\n## Items\n");
    for e in &r.entries {
        let _ = writeln!(s, "### {}. {}\n", e.rank, e.path);
        let _ = writeln!(s, "- Evidence id: `{}`", e.evidence_id);
        let _ = writeln!(s, "- Kind: {}", e.kind);
        let _ = writeln!(s, "- Status: {}", e.status.as_str());
        let _ = writeln!(s, "- Score: {}", fmt_score(e.aggregate_score));
        for n in &e.notes {
            let _ = writeln!(s, "- Note: {n}");
        }
        for f in &e.rule_flags {
            let _ = writeln!(s, "- Rule flag `{}` ({}): {}", f.label, f.severity, f.rationale);
        }
        for f in &e.model_flags {
            let _ = writeln!(s, "- Model flag `{}` ({}, run `{}`): {}", f.label, f.severity, f.run_id, f.rationale);
        }
        for f in &e.findings {
            let _ = writeln!(
                s,
                "- Run `{}` {} {} #{}: relevance {} ({}). {}",
                f.run_id,
                f.profile,
                f.chunk_ref,
                f.repetition,
                f.relevance,
                match f.parse_status {
                    ParseStatus::Structured => "structured",
                    ParseStatus::Degraded => "degraded",
                },
                f.summary.replace(['\r', '\n'], " ")
            );
        }
        s.push('\n');
    }
    if r.entries.is_empty() {
        s.push_str("(no evidence items)\n\n");
    }

    let _ = writeln!(s, "## Caveats\n");
    for c in &r.caveats {
        let _ = writeln!(s, "- {c}");
    }
    s
}
