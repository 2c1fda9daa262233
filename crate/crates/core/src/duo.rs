//! Pairwise re-ranking (stage H2) and preference aggregation.
//!
//! For the candidates of `R_1`, a pairwise scorer estimates `p[i][j]`, the
//! probability that candidate `i` is more relevant than candidate `j`. Each
//! candidate then receives a single score from its row of the matrix:
//!
//! | method   | `s_i`                                      |
//! |----------|--------------------------------------------|
//! | `Sum`    | `Σ_{j ∈ J_i} p[i][j]`                      |
//! | `Binary` | `Σ_{j ∈ J_i} 1[p[i][j] > 0.5]`             |
//! | `Min`    | `min_{j ∈ J_i} p[i][j]`                    |
//! | `Max`    | `max_{j ∈ J_i} p[i][j]`                    |
//! | `Sample` | `Σ_{j ∈ J_i(m)} p[i][j]`                   |
//!
//! with `J_i = {j : j ≠ i}` and `J_i(m)` a size-`m` subset of `J_i` drawn
//! without replacement, independently per row.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, DocumentStore, Query};
use crate::mono::PROB_EPS;
use crate::ranking::{rerank_by_scores, RankedList};
use crate::scorer::{validate_scores, PairwiseScorer, StageError};
use crate::seed::derive_seed;

pub const H2_LABEL: &str = "H2";

/// Token budget for `[CLS] query [SEP] d_i [SEP] d_j [SEP]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DuoTruncation {
    pub max_query: usize,
    pub max_doc_each: usize,
    pub reserved: usize,
}

impl Default for DuoTruncation {
    fn default() -> Self {
        Self {
            max_query: 62,
            max_doc_each: 223,
            reserved: 4,
        }
    }
}

impl DuoTruncation {
    pub fn total(&self) -> usize {
        self.max_query + 2 * self.max_doc_each + self.reserved
    }

    pub fn apply<'a, T>(&self, query: &'a [T], doc_i: &'a [T], doc_j: &'a [T]) -> (&'a [T], &'a [T], &'a [T]) {
        (
            &query[..query.len().min(self.max_query)],
            &doc_i[..doc_i.len().min(self.max_doc_each)],
            &doc_j[..doc_j.len().min(self.max_doc_each)],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregationMethod {
    Sum,
    Binary,
    Min,
    Max,
    Sample { m: usize, seed: u64 },
}

impl AggregationMethod {
    pub fn name(&self) -> &'static str {
        match self {
            AggregationMethod::Sum => "sum",
            AggregationMethod::Binary => "binary",
            AggregationMethod::Min => "min",
            AggregationMethod::Max => "max",
            AggregationMethod::Sample { .. } => "sample",
        }
    }

    pub fn sample_m(&self) -> Option<usize> {
        match self {
            AggregationMethod::Sample { m, .. } => Some(*m),
            _ => None,
        }
    }

    /// Specializes a Sample seed to one query. Other methods are returned as is.
    pub fn for_query(&self, query_id: &str) -> Self {
        match *self {
            AggregationMethod::Sample { m, seed } => AggregationMethod::Sample {
                m,
                seed: derive_seed(seed, &[query_id.as_bytes()]),
            },
            other => other,
        }
    }

    /// The comparison sets `J_i` for `n` candidates, each sorted ascending.
    pub fn partners(&self, n: usize) -> Result<Vec<Vec<usize>>, DuoError> {
        match *self {
            AggregationMethod::Sample { m, seed } => sample_partners(n, m, seed),
            _ => Ok((0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect()),
        }
    }
}

impl fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `sum|binary|min|max|sample`; `sample` gets `m = 1, seed = 0`
/// until the caller fills them in.
impl FromStr for AggregationMethod {
    type Err = DuoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "sum" => AggregationMethod::Sum,
            "binary" => AggregationMethod::Binary,
            "min" => AggregationMethod::Min,
            "max" => AggregationMethod::Max,
            "sample" => AggregationMethod::Sample { m: 1, seed: 0 },
            other => return Err(DuoError::UnknownMethod(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DuoError {
    #[error("pair matrix has no entry for ({i}, {j})")]
    MissingCell { i: usize, j: usize },
    #[error("sample size m = {m} must satisfy 1 <= m <= n - 1 (n = {n})")]
    InvalidSample { m: usize, n: usize },
    #[error("unknown aggregation method {0:?}")]
    UnknownMethod(String),
    #[error("pairwise loss is undefined: no pair has exactly one relevant member")]
    NoMixedPairs,
    #[error("{labels} labels for a {n}-candidate matrix")]
    LabelMismatch { labels: usize, n: usize },
    #[error("probability {p} for ({i}, {j}) is outside [0, 1]")]
    InvalidProbability { i: usize, j: usize, p: f64 },
}

/// Pairwise preference probabilities over `n` candidates. Diagonal cells do
/// not exist; off-diagonal cells may be unpopulated.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    n: usize,
    cells: Vec<Option<f64>>,
}

impl PairMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cells: vec![None; n * n],
        }
    }

    /// Fully populated matrix with `p[i][j] = f(i, j)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::new(n);
        for (i, j) in enumerate_pairs(n) {
            m.cells[i * n + j] = Some(f(i, j));
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn set(&mut self, i: usize, j: usize, p: f64) -> Result<(), DuoError> {
        if i == j || i >= self.n || j >= self.n {
            return Err(DuoError::MissingCell { i, j });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(DuoError::InvalidProbability { i, j, p });
        }
        self.cells[i * self.n + j] = Some(p);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i == j || i >= self.n || j >= self.n {
            return None;
        }
        self.cells[i * self.n + j]
    }

    pub fn populated(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Populated cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(k, c)| c.map(|p| (k / self.n, k % self.n, p)))
    }

    fn row(&self, i: usize, partners: &[usize]) -> Result<Vec<f64>, DuoError> {
        partners
            .iter()
            .map(|&j| self.get(i, j).ok_or(DuoError::MissingCell { i, j }))
            .collect()
    }
}

/// All ordered pairs `(i, j)`, `i ≠ j`, row-major.
pub fn enumerate_pairs(n: usize) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.push((i, j));
            }
        }
    }
    out
}

/// Draws `J_i(m)` for every row without replacement. Row `i` is seeded from
/// `(seed, i)`, so rows are independent and reproducible.
pub fn sample_partners(n: usize, m: usize, seed: u64) -> Result<Vec<Vec<usize>>, DuoError> {
    if n < 2 || m == 0 || m > n - 1 {
        return Err(DuoError::InvalidSample { m, n });
    }
    Ok((0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[&(i as u64).to_le_bytes()]));
            let mut row: Vec<usize> = rand::seq::index::sample(&mut rng, n - 1, m)
                .into_iter()
                .map(|k| if k < i { k } else { k + 1 })
                .collect();
            row.sort_unstable();
            row
        })
        .collect())
}

/// One score per candidate from its row of `matrix`.
pub fn aggregate(matrix: &PairMatrix, method: &AggregationMethod) -> Result<Vec<f64>, DuoError> {
    let partners = method.partners(matrix.len())?;
    partners
        .iter()
        .enumerate()
        .map(|(i, js)| {
            let row = matrix.row(i, js)?;
            Ok(match method {
                AggregationMethod::Sum | AggregationMethod::Sample { .. } => row.iter().sum(),
                AggregationMethod::Binary => row.iter().filter(|&&p| p > 0.5).count() as f64,
                AggregationMethod::Min => row.iter().copied().fold(f64::INFINITY, f64::min),
                AggregationMethod::Max => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DuoOutput {
    pub list: RankedList,
    pub matrix: PairMatrix,
    /// Pairs actually sent to the scorer.
    pub pairs_scored: usize,
}

/// Scores the pairs `method` needs (only the sampled ones under Sample),
/// aggregates, and re-sorts `r1`. Lists shorter than two are passed through.
pub fn rerank_duo<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    store: &DocumentStore,
    query: &Query,
    r1: &RankedList,
    method: &AggregationMethod,
) -> Result<DuoOutput, StageError> {
    let n = r1.len();
    if n < 2 {
        let mut list = r1.clone();
        list.stage = H2_LABEL.into();
        return Ok(DuoOutput {
            list,
            matrix: PairMatrix::new(n),
            pairs_scored: 0,
        });
    }
    let method = method.for_query(&query.query_id);
    let partners = method.partners(n).map_err(StageError::Duo)?;
    let docs: Vec<&Document> = r1
        .doc_ids()
        .map(|id| store.get(id).map_err(|_| StageError::MissingDocument(id.to_string())))
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(usize, usize)> = partners
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
        .collect();
    let doc_pairs: Vec<(&Document, &Document)> = pairs.iter().map(|&(i, j)| (docs[i], docs[j])).collect();
    let probs = scorer.score_pairs(query, &doc_pairs)?;
    validate_scores(&probs, pairs.len())?;
    let mut matrix = PairMatrix::new(n);
    for (&(i, j), &p) in pairs.iter().zip(&probs) {
        matrix.set(i, j, p).map_err(StageError::Duo)?;
    }
    let scores = aggregate(&matrix, &method).map_err(StageError::Duo)?;
    Ok(DuoOutput {
        list: rerank_by_scores(r1, &scores, H2_LABEL, n),
        matrix,
        pairs_scored: pairs.len(),
    })
}

/// `-Σ_{i∈pos, j∈neg} ln p[i][j] - Σ_{i∈neg, j∈pos} ln(1 - p[i][j])` over the
/// populated cells with exactly one relevant member.
pub fn pairwise_loss(matrix: &PairMatrix, labels: &[u8]) -> Result<f64, DuoError> {
    if labels.len() != matrix.len() {
        return Err(DuoError::LabelMismatch {
            labels: labels.len(),
            n: matrix.len(),
        });
    }
    let clamp = |p: f64| p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let mut loss = 0.0;
    let mut mixed = 0usize;
    for (i, j, p) in matrix.cells() {
        match (labels[i] >= 1, labels[j] >= 1) {
            (true, false) => loss -= clamp(p).ln(),
            (false, true) => loss -= (1.0 - clamp(p)).ln(),
            _ => continue,
        }
        mixed += 1;
    }
    if mixed == 0 {
        return Err(DuoError::NoMixedPairs);
    }
    Ok(loss)
}
