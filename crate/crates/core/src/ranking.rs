//! Ranked candidate lists passed between stages.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub score: f64,
}

impl Candidate {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Output of one stage: candidates sorted by score, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub stage: String,
    pub entries: Vec<Candidate>,
}

impl RankedList {
    pub fn new(query_id: impl Into<String>, stage: impl Into<String>, entries: Vec<Candidate>) -> Self {
        Self {
            query_id: query_id.into(),
            stage: stage.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|c| c.doc_id.as_str())
    }

    /// Keeps the first `k` entries.
    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }
}

/// Returns the first `min(k, len)` entries of `list`, order preserved.
pub fn truncate_list(list: &RankedList, k: usize) -> RankedList {
    RankedList {
        query_id: list.query_id.clone(),
        stage: list.stage.clone(),
        entries: list.entries.iter().take(k).cloned().collect(),
    }
}

/// Stage ordering: score descending, then previous-stage rank ascending,
/// then doc id ascending.
pub fn stage_order(a: (f64, usize, &str), b: (f64, usize, &str)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then_with(|| a.2.cmp(b.2))
}

/// Re-sorts `upstream` by new per-candidate `scores` (aligned with
/// `upstream.entries`), breaking ties by upstream rank, and keeps `keep`.
pub fn rerank_by_scores(upstream: &RankedList, scores: &[f64], stage: &str, keep: usize) -> RankedList {
    debug_assert_eq!(upstream.len(), scores.len());
    let mut order: Vec<usize> = (0..upstream.len()).collect();
    order.sort_by(|&a, &b| {
        stage_order(
            (scores[a], a, &upstream.entries[a].doc_id),
            (scores[b], b, &upstream.entries[b].doc_id),
        )
    });
    let entries = order
        .into_iter()
        .take(keep)
        .map(|i| Candidate::new(upstream.entries[i].doc_id.clone(), scores[i]))
        .collect();
    RankedList::new(upstream.query_id.clone(), stage, entries)
}
