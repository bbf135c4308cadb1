//! Prompting, verdict parsing, scoring and per-item analysis.

pub mod analyze;
pub mod context;
pub mod prompt;
pub mod score;
pub mod verdict;

pub use analyze::{analyze_evidence, run_id, AnalysisEnv, AnalysisRun, AnalyzeError, RunStore};
pub use context::CaseContext;
pub use prompt::{build_prompt, system_prompt, PromptInput, TEMPLATE_VERSION};
pub use score::{rank_corpus, score_evidence, PriorityEntry};
pub use verdict::{parse_verdict, parse_verdict_bytes, ParseStatus, Verdict, VerdictFlag};
