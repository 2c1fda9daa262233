//! Candidate generation: a bag-of-words inverted index scored with BM25.
//!
//! ```text
//! score(q, d) = Σ_{t ∈ q} idf(t) · tf·(k1 + 1) / (tf + k1·(1 − b + b·|d|/avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```
//!
//! `k1` is [`Bm25Params::saturation`] and `b` is [`Bm25Params::length_norm`].
//! Query terms repeated in the query are counted once per occurrence.

mod persist;
mod tokenizer;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentStore, Query};
use crate::ranking::{Candidate, RankedList};

pub use persist::{load_index, save_index, IndexMeta, INDEX_FORMAT_VERSION};
pub use tokenizer::{token_spans, tokenize, Tokenizer, TokenizerConfig};

pub const H0_LABEL: &str = "H0";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    /// Term-frequency saturation (`k1`).
    pub saturation: f64,
    /// Document-length normalization (`b`).
    pub length_norm: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            saturation: 0.9,
            length_norm: 0.4,
        }
    }
}

impl Bm25Params {
    pub fn new(saturation: f64, length_norm: f64) -> Result<Self, IndexError> {
        let params = Self {
            saturation,
            length_norm,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if !(self.saturation > 0.0 && self.saturation.is_finite()) {
            return Err(IndexError::InvalidParams(format!(
                "saturation must be > 0, got {}",
                self.saturation
            )));
        }
        if !(0.0..=1.0).contains(&self.length_norm) {
            return Err(IndexError::InvalidParams(format!(
                "length_norm must be in [0, 1], got {}",
                self.length_norm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("cannot index an empty collection")]
    EmptyCollection,
    #[error("unknown internal document id {0}")]
    UnknownDoc(u32),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, u32>,
    tokenizer: Tokenizer,
    params: Bm25Params,
}

impl InvertedIndex {
    /// Indexes every document of `store`; internal ids follow store order.
    pub fn build(store: &DocumentStore, tokenizer: Tokenizer, params: Bm25Params) -> Result<Self, IndexError> {
        params.validate()?;
        if store.is_empty() {
            return Err(IndexError::EmptyCollection);
        }
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(store.len());
        let mut doc_ids = Vec::with_capacity(store.len());
        let mut tf: HashMap<String, u32> = HashMap::new();
        for (i, doc) in store.iter().enumerate() {
            let doc_no = i as u32;
            tf.clear();
            let tokens = tokenizer.tokenize(&doc.text);
            doc_lengths.push(tokens.len() as u32);
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, &count) in &tf {
                postings
                    .entry(term.clone())
                    .or_default()
                    .push(Posting { doc: doc_no, tf: count });
            }
            doc_ids.push(doc.doc_id.clone());
        }
        Self::from_parts(postings, doc_lengths, doc_ids, tokenizer, params)
    }

    pub(crate) fn from_parts(
        postings: HashMap<String, Vec<Posting>>,
        doc_lengths: Vec<u32>,
        doc_ids: Vec<String>,
        tokenizer: Tokenizer,
        params: Bm25Params,
    ) -> Result<Self, IndexError> {
        if doc_lengths.is_empty() {
            return Err(IndexError::EmptyCollection);
        }
        if doc_lengths.len() != doc_ids.len() {
            return Err(IndexError::Format("length table and id map disagree".into()));
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_length = total as f64 / doc_lengths.len() as f64;
        let doc_lookup = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Ok(Self {
            postings,
            doc_lengths,
            avg_doc_length,
            doc_ids,
            doc_lookup,
            tokenizer,
            params,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc: u32) -> Option<u32> {
        self.doc_lengths.get(doc as usize).copied()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn doc_id(&self, doc: u32) -> Option<&str> {
        self.doc_ids.get(doc as usize).map(String::as_str)
    }

    pub fn internal_id(&self, doc_id: &str) -> Option<u32> {
        self.doc_lookup.get(doc_id).copied()
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// Parameters the index was built with; used when callers pass none.
    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.doc_count(), self.doc_freq(term))
    }

    /// Single-term contribution for a document of length `doc_len`.
    pub fn term_weight(&self, idf: f64, tf: u32, doc_len: u32, params: Bm25Params) -> f64 {
        let tf = tf as f64;
        let norm = 1.0 - params.length_norm + params.length_norm * doc_len as f64 / self.avg_doc_length;
        idf * tf * (params.saturation + 1.0) / (tf + params.saturation * norm)
    }

    pub fn bm25_score(&self, query_tokens: &[String], doc: u32, params: Bm25Params) -> Result<f64, IndexError> {
        let doc_len = self.doc_length(doc).ok_or(IndexError::UnknownDoc(doc))?;
        let mut score = 0.0;
        for term in query_tokens {
            let postings = self.postings(term);
            if let Ok(pos) = postings.binary_search_by_key(&doc, |p| p.doc) {
                let idf = idf(self.doc_count(), postings.len());
                score += self.term_weight(idf, postings[pos].tf, doc_len, params);
            }
        }
        Ok(score)
    }

    /// BM25 of an arbitrary token sequence against this index's collection
    /// statistics (df, N, average length).
    pub fn bm25_for_tokens(&self, query_tokens: &[String], doc_tokens: &[String], params: Bm25Params) -> f64 {
        let mut tf: HashMap<&str, u32> = HashMap::new();
        for t in doc_tokens {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        query_tokens
            .iter()
            .filter_map(|t| tf.get(t.as_str()).map(|&c| (t, c)))
            .map(|(t, c)| self.term_weight(self.idf(t), c, doc_tokens.len() as u32, params))
            .sum()
    }

    /// Top-`k0` documents sharing at least one term with the query.
    pub fn retrieve_top_k(&self, query: &Query, k0: usize, params: Bm25Params) -> RankedList {
        let tokens = self.tokenizer.tokenize(&query.text);
        let entries = self
            .top_k_internal(&tokens, k0, params)
            .into_iter()
            .map(|(doc, score)| Candidate::new(self.doc_ids[doc as usize].clone(), score))
            .collect();
        RankedList::new(query.query_id.clone(), H0_LABEL, entries)
    }

    fn top_k_internal(&self, query_tokens: &[String], k: usize, params: Bm25Params) -> Vec<(u32, f64)> {
        if k == 0 || query_tokens.is_empty() {
            return Vec::new();
        }
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in query_tokens {
            let postings = self.postings(term);
            if postings.is_empty() {
                continue;
            }
            let idf = idf(self.doc_count(), postings.len());
            for p in postings {
                *acc.entry(p.doc).or_insert(0.0) +=
                    self.term_weight(idf, p.tf, self.doc_lengths[p.doc as usize], params);
            }
        }
        // Min-heap on rank order: the top of the heap is the worst kept hit.
        let mut heap: BinaryHeap<HeapHit<'_>> = BinaryHeap::with_capacity(k + 1);
        for (doc, score) in acc {
            let hit = HeapHit {
                score,
                doc_id: &self.doc_ids[doc as usize],
                doc,
            };
            if heap.len() < k {
                heap.push(hit);
            } else if let Some(worst) = heap.peek() {
                if hit.cmp(worst) == Ordering::Less {
                    heap.pop();
                    heap.push(hit);
                }
            }
        }
        let mut hits = heap.into_vec();
        hits.sort();
        hits.into_iter().map(|h| (h.doc, h.score)).collect()
    }
}

pub fn idf(doc_count: usize, doc_freq: usize) -> f64 {
    let n = doc_count as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Ordered so that "better" hits compare as `Less`.
struct HeapHit<'a> {
    score: f64,
    doc_id: &'a str,
    doc: u32,
}

impl Ord for HeapHit<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.doc_id.cmp(other.doc_id))
    }
}

impl PartialOrd for HeapHit<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for HeapHit<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapHit<'_> {}
