//! Aggregate scores and corpus ranking.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::verdict::Verdict;
use crate::text::{RuleFlag, Severity};

pub const HIGH_FLAG_FLOOR: f64 = 7.0;
pub const HIGH_FLAG_BONUS: f64 = 0.5;
pub const MAX_SCORE: f64 = 10.0;

/// Score one item from its run verdicts and deterministic rule flags.
///
/// `base` is the highest run relevance (0 without runs), raised to at least
/// 7 by any high-severity rule flag. Each distinct high-severity label, from
/// runs or rules, adds 0.5. Capped at 10.
pub fn score_evidence<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>, rule_flags: &[RuleFlag]) -> f64 {
    let mut base = 0.0f64;
    let mut high_labels: BTreeSet<&str> = BTreeSet::new();
    for v in verdicts {
        base = base.max(v.relevance as f64);
        high_labels.extend(v.flags.iter().filter(|f| f.severity == Severity::High).map(|f| f.label.as_str()));
    }
    let rule_high: Vec<&RuleFlag> = rule_flags.iter().filter(|f| f.severity == Severity::High).collect();
    if !rule_high.is_empty() {
        base = base.max(HIGH_FLAG_FLOOR);
    }
    high_labels.extend(rule_high.iter().map(|f| f.label.as_str()));
    (base + HIGH_FLAG_BONUS * high_labels.len() as f64).min(MAX_SCORE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityEntry {
    pub evidence_id: String,
    pub path: String,
    pub aggregate_score: f64,
    /// 1-based; 0 until ranked.
    pub rank: usize,
    pub contributing_runs: Vec<String>,
    pub rule_flags: Vec<RuleFlag>,
}

/// Order by score descending, then path ascending, and assign ranks 1..N.
pub fn rank_corpus(mut entries: Vec<PriorityEntry>) -> Vec<PriorityEntry> {
    entries.sort_by(|a, b| {
        b.aggregate_score
            .partial_cmp(&a.aggregate_score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.path.cmp(&b.path))
            .then_with(|| a.evidence_id.cmp(&b.evidence_id))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    entries
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triage::verdict::{ParseStatus, VerdictFlag};
    use proptest::prelude::*;

    fn verdict(relevance: u8, high: &[&str]) -> Verdict {
        Verdict {
            relevance,
            flags: high
                .iter()
                .map(|l| VerdictFlag { label: l.to_string(), severity: Severity::High, rationale: "r".into() })
                .collect(),
            summary: "s".into(),
            parse_status: ParseStatus::Structured,
        }
    }

    fn rule(label: &str, severity: Severity) -> RuleFlag {
        RuleFlag { label: label.into(), severity, rationale: "r".into(), rule_id: label.into() }
    }

    fn entry(path: &str, score: f64) -> PriorityEntry {
        PriorityEntry {
            evidence_id: format!("id-{path}"),
            path: path.into(),
            aggregate_score: score,
            rank: 0,
            contributing_runs: vec![],
            rule_flags: vec![],
        }
    }

    #[test]
    fn examples() {
        assert_eq!(score_evidence(&[], &[]), 0.0);
        assert_eq!(score_evidence(&[verdict(3, &[]), verdict(8, &[])], &[]), 8.0);
        // Hand-applied: floor 7, one distinct high label adds 0.5.
        assert_eq!(score_evidence(&[], &[rule("metadata-anomaly", Severity::High)]), 7.5);
        assert_eq!(score_evidence(&[], &[rule("suspicious-author", Severity::Medium)]), 0.0);
        // Same label from a run and a rule counts once: 9 + 0.5.
        assert_eq!(score_evidence(&[verdict(9, &["metadata-anomaly"])], &[rule("metadata-anomaly", Severity::High)]), 9.5);
        assert_eq!(score_evidence(&[verdict(10, &["a", "b"])], &[]), 10.0);
    }

    #[test]
    fn tie_break_by_path() {
        let ranked = rank_corpus(vec![entry("a", 2.0), entry("b", 9.0), entry("c", 9.0)]);
        let order: Vec<(&str, usize)> = ranked.iter().map(|e| (e.path.as_str(), e.rank)).collect();
        assert_eq!(order, [("b", 1), ("c", 2), ("a", 3)]);
        assert_eq!(rank_corpus(vec![entry("x", 0.0)])[0].rank, 1);
    }

    fn arb_verdict() -> impl Strategy<Value = Verdict> {
        (0u8..=10, proptest::collection::vec(prop_oneof!["a", "b", "c"], 0..3)).prop_map(|(r, labels)| {
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            verdict(r, &refs)
        })
    }

    proptest! {
        #[test]
        fn score_permutation_invariant_and_monotone(
            runs in proptest::collection::vec(arb_verdict(), 0..8),
            extra in arb_verdict(),
            high_rule in any::<bool>(),
        ) {
            let rules = if high_rule { vec![rule("metadata-anomaly", Severity::High)] } else { vec![] };
            let s = score_evidence(&runs, &rules);
            let mut rev = runs.clone();
            rev.reverse();
            prop_assert_eq!(s, score_evidence(&rev, &rules));
            let mut more = runs.clone();
            more.push(extra);
            prop_assert!(score_evidence(&more, &rules) >= s);
            prop_assert!((0.0..=MAX_SCORE).contains(&s));
        }

        #[test]
        fn ranking_is_permutation_and_sorted(scores in proptest::collection::vec(0u8..=20, 0..40), seed in any::<u64>()) {
            let entries: Vec<PriorityEntry> =
                scores.iter().enumerate().map(|(i, s)| entry(&format!("f{i:03}"), *s as f64 / 2.0)).collect();
            let ranked = rank_corpus(entries.clone());
            let mut ranks: Vec<usize> = ranked.iter().map(|e| e.rank).collect();
            ranks.sort();
            prop_assert_eq!(ranks, (1..=entries.len()).collect::<Vec<_>>());
            for w in ranked.windows(2) {
                prop_assert!(w[0].aggregate_score >= w[1].aggregate_score);
            }
            // Input order does not matter.
            let mut shuffled = entries.clone();
            let n = shuffled.len();
            if n > 1 {
                shuffled.rotate_left((seed as usize) % n);
            }
            prop_assert_eq!(rank_corpus(shuffled), ranked);
        }
    }
}
