//! Pointwise re-ranking (stage H1).

use crate::corpus::{DocumentStore, Query};
use crate::index::Tokenizer;
use crate::ranking::{rerank_by_scores, RankedList};
use crate::scorer::{validate_scores, PointwiseScorer, StageError};

pub const H1_LABEL: &str = "H1";

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside the losses.
pub const PROB_EPS: f64 = 1e-7;

/// Token budget for a `[CLS] query [SEP] doc [SEP]` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonoTruncation {
    pub max_query_tokens: usize,
    pub max_total_tokens: usize,
    pub reserved: usize,
}

impl Default for MonoTruncation {
    fn default() -> Self {
        Self {
            max_query_tokens: 64,
            max_total_tokens: 512,
            reserved: 3,
        }
    }
}

impl MonoTruncation {
    /// Drops tail tokens so the query fits in 64 tokens and the whole input
    /// in 512.
    pub fn apply<'q, 'd, T>(&self, query: &'q [T], doc: &'d [T]) -> (&'q [T], &'d [T]) {
        let q = &query[..query.len().min(self.max_query_tokens)];
        let doc_budget = self.max_total_tokens.saturating_sub(self.reserved + q.len());
        (q, &doc[..doc.len().min(doc_budget)])
    }
}

pub fn truncate_mono<'q, 'd, T>(query: &'q [T], doc: &'d [T]) -> (&'q [T], &'d [T]) {
    MonoTruncation::default().apply(query, doc)
}

/// Cuts `text` after its `keep`-th token, preserving the original bytes.
pub fn truncate_text<'a>(tokenizer: &Tokenizer, text: &'a str, keep: usize) -> &'a str {
    if keep == 0 {
        return "";
    }
    match tokenizer.spans(text).nth(keep - 1) {
        Some((_, span)) if tokenizer.spans(&text[span.end..]).next().is_some() => &text[..span.end],
        _ => text,
    }
}

/// Scores every candidate of `r0` independently and keeps the best `k1`.
pub fn rerank_mono<S: PointwiseScorer + ?Sized>(
    scorer: &S,
    store: &DocumentStore,
    query: &Query,
    r0: &RankedList,
    k1: usize,
) -> Result<RankedList, StageError> {
    let docs = r0
        .doc_ids()
        .map(|id| store.get(id).map_err(|_| StageError::MissingDocument(id.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let scores = if docs.is_empty() {
        Vec::new()
    } else {
        scorer.score_batch(query, &docs)?
    };
    validate_scores(&scores, docs.len())?;
    Ok(rerank_by_scores(r0, &scores, H1_LABEL, k1))
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy summed over a batch:
/// `-Σ_{pos} ln s_j - Σ_{neg} ln(1 - s_j)`.
pub fn pointwise_loss(scores: &[f64], labels: &[u8]) -> Result<f64, StageError> {
    if scores.len() != labels.len() {
        return Err(StageError::Invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut loss = 0.0;
    for (&s, &y) in scores.iter().zip(labels) {
        loss -= match y {
            1 => clamp(s).ln(),
            0 => (1.0 - clamp(s)).ln(),
            other => return Err(StageError::Invalid(format!("label must be 0 or 1, got {other}"))),
        };
    }
    Ok(loss)
}
