//! Scorer interfaces for the re-ranking stages, plus reference scorers.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::corpus::{Document, Qrels, Query};

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("scorer returned {got} scores for {expected} items")]
    LengthMismatch { expected: usize, got: usize },
    #[error("score {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error(transparent)]
    Remote(#[from] crate::remote::RemoteError),
    #[error("{0}")]
    Other(String),
}

/// Failure inside a re-ranking stage.
#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("document {0:?} is missing from the store")]
    MissingDocument(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Duo(#[from] crate::duo::DuoError),
    #[error("{0}")]
    Invalid(String),
}

/// Estimates, per candidate, the probability that it is relevant to the query.
pub trait PointwiseScorer: Send + Sync {
    fn score_batch(&self, query: &Query, docs: &[&Document]) -> Result<Vec<f64>, ScoreError>;
}

/// Estimates, per ordered pair `(d_i, d_j)`, the probability that `d_i` is
/// more relevant than `d_j`. No symmetry between `(i, j)` and `(j, i)` is
/// assumed.
pub trait PairwiseScorer: Send + Sync {
    fn score_pairs(&self, query: &Query, pairs: &[(&Document, &Document)]) -> Result<Vec<f64>, ScoreError>;
}

impl<T: PointwiseScorer + ?Sized> PointwiseScorer for &T {
    fn score_batch(&self, query: &Query, docs: &[&Document]) -> Result<Vec<f64>, ScoreError> {
        (**self).score_batch(query, docs)
    }
}

impl<T: PairwiseScorer + ?Sized> PairwiseScorer for &T {
    fn score_pairs(&self, query: &Query, pairs: &[(&Document, &Document)]) -> Result<Vec<f64>, ScoreError> {
        (**self).score_pairs(query, pairs)
    }
}

impl<T: PointwiseScorer + ?Sized> PointwiseScorer for Box<T> {
    fn score_batch(&self, query: &Query, docs: &[&Document]) -> Result<Vec<f64>, ScoreError> {
        (**self).score_batch(query, docs)
    }
}

impl<T: PairwiseScorer + ?Sized> PairwiseScorer for Box<T> {
    fn score_pairs(&self, query: &Query, pairs: &[(&Document, &Document)]) -> Result<Vec<f64>, ScoreError> {
        (**self).score_pairs(query, pairs)
    }
}

/// Checks the scorer contract: one finite score in `[0, 1]` per item.
pub fn validate_scores(scores: &[f64], expected: usize) -> Result<(), ScoreError> {
    if scores.len() != expected {
        return Err(ScoreError::LengthMismatch {
            expected,
            got: scores.len(),
        });
    }
    match scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        Some(index) => Err(ScoreError::OutOfRange {
            index,
            value: scores[index],
        }),
        None => Ok(()),
    }
}

/// Scores 1 for judged-relevant documents and 0 otherwise.
#[derive(Debug, Clone)]
pub struct QrelsOracle {
    qrels: Qrels,
}

impl QrelsOracle {
    pub fn new(qrels: Qrels) -> Self {
        Self { qrels }
    }

    fn rel(&self, query: &Query, doc: &Document) -> bool {
        self.qrels.is_relevant(&query.query_id, &doc.doc_id)
    }
}

impl PointwiseScorer for QrelsOracle {
    fn score_batch(&self, query: &Query, docs: &[&Document]) -> Result<Vec<f64>, ScoreError> {
        Ok(docs
            .iter()
            .map(|d| if self.rel(query, d) { 1.0 } else { 0.0 })
            .collect())
    }
}

/// `p = 1` when only `d_i` is relevant, `0` when only `d_j` is, `0.5` otherwise.
impl PairwiseScorer for QrelsOracle {
    fn score_pairs(&self, query: &Query, pairs: &[(&Document, &Document)]) -> Result<Vec<f64>, ScoreError> {
        Ok(pairs
            .iter()
            .map(|(a, b)| match (self.rel(query, a), self.rel(query, b)) {
                (true, false) => 1.0,
                (false, true) => 0.0,
                _ => 0.5,
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl PointwiseScorer for ConstantScorer {
    fn score_batch(&self, _: &Query, docs: &[&Document]) -> Result<Vec<f64>, ScoreError> {
        Ok(vec![self.0; docs.len()])
    }
}

impl PairwiseScorer for ConstantScorer {
    fn score_pairs(&self, _: &Query, pairs: &[(&Document, &Document)]) -> Result<Vec<f64>, ScoreError> {
        Ok(vec![self.0; pairs.len()])
    }
}

/// Wraps a scorer and counts every item it is asked to score.
#[derive(Debug, Default)]
pub struct CountingScorer<S> {
    inner: S,
    items: AtomicUsize,
    calls: AtomicUsize,
}

impl<S> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            items: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of items (documents or pairs) scored so far.
    pub fn items(&self) -> usize {
        self.items.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.items.store(0, Ordering::SeqCst);
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: PointwiseScorer> PointwiseScorer for CountingScorer<S> {
    fn score_batch(&self, query: &Query, docs: &[&Document]) -> Result<Vec<f64>, ScoreError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.items.fetch_add(docs.len(), Ordering::SeqCst);
        self.inner.score_batch(query, docs)
    }
}

impl<S: PairwiseScorer> PairwiseScorer for CountingScorer<S> {
    fn score_pairs(&self, query: &Query, pairs: &[(&Document, &Document)]) -> Result<Vec<f64>, ScoreError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.items.fetch_add(pairs.len(), Ordering::SeqCst);
        self.inner.score_pairs(query, pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(validate_scores(&[0.0, 1.0, 0.5], 3).is_ok());
        assert!(matches!(
            validate_scores(&[0.1; 119], 120),
            Err(ScoreError::LengthMismatch { expected: 120, got: 119 })
        ));
        assert!(matches!(
            validate_scores(&[0.1, 1.3], 2),
            Err(ScoreError::OutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            validate_scores(&[f64::NAN], 1),
            Err(ScoreError::OutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn oracle_pairs() {
        let mut q = Qrels::new();
        q.insert("q", "r", 1);
        q.insert("q", "n", 0);
        let oracle = QrelsOracle::new(q);
        let query = Query::new("q", "");
        let r = Document::new("r", "");
        let n = Document::new("n", "");
        let u = Document::new("u", "");
        let p = oracle
            .score_pairs(&query, &[(&r, &n), (&n, &r), (&n, &u), (&r, &r)])
            .unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.5, 0.5]);
        assert_eq!(oracle.score_batch(&query, &[&r, &n, &u]).unwrap(), vec![1.0, 0.0, 0.0]);
    }
}
