//! Conflict resolution between overlapping candidate spans.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::text_model::{Source, Span};

/// Total order on candidates, best first: longer span, then higher-priority
/// source, then higher score, then earlier start, then label order.
pub fn compare_candidates(a: &Span, b: &Span, rank: impl Fn(Source) -> usize) -> Ordering {
    b.len()
        .cmp(&a.len())
        .then_with(|| rank(a.source).cmp(&rank(b.source)))
        .then_with(|| b.score.total_cmp(&a.score))
        .then_with(|| a.start.cmp(&b.start))
        .then_with(|| a.label.cmp(&b.label))
}

/// Greedily accepts candidates in preference order, discarding any that
/// overlaps an already accepted span. Output is sorted by start and does not
/// depend on the order of `candidates`.
pub fn resolve_spans(candidates: &[Span], rank: impl Fn(Source) -> usize) -> Vec<Span> {
    let mut ordered: Vec<&Span> = candidates.iter().filter(|s| !s.is_empty()).collect();
    ordered.sort_by(|a, b| compare_candidates(a, b, &rank));

    // start -> accepted span; accepted spans never overlap
    let mut accepted: BTreeMap<usize, &Span> = BTreeMap::new();
    for span in ordered {
        let blocked = accepted
            .range(..span.end)
            .next_back()
            .is_some_and(|(_, prev)| prev.end > span.start);
        if !blocked {
            accepted.insert(span.start, span);
        }
    }
    accepted.into_values().cloned().collect()
}
