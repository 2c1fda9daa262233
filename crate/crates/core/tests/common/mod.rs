//! Brute-force reference implementations and fixture generators shared by
//! the integration tests. Nothing here calls into the scoring code it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use cascade_core::corpus::{Document, DocumentStore, Qrels, Query};
use cascade_core::index::{Bm25Params, InvertedIndex, Tokenizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Scores every document from scratch: no postings, no cached statistics.
pub fn brute_bm25(docs: &[(String, String)], query: &str, k1: f64, b: f64) -> Vec<(String, f64)> {
    let toks: Vec<Vec<String>> = docs.iter().map(|(_, t)| words(t)).collect();
    let n = docs.len() as f64;
    let avg = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let q = words(query);
    docs.iter()
        .zip(&toks)
        .map(|((id, _), d)| {
            let mut s = 0.0;
            for t in &q {
                let tf = d.iter().filter(|w| *w == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = toks.iter().filter(|x| x.contains(t)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * d.len() as f64 / avg));
            }
            (id.clone(), s)
        })
        .collect()
}

/// Exhaustive ranking of the documents sharing a term with the query.
pub fn brute_top_k(docs: &[(String, String)], query: &str, k: usize, k1: f64, b: f64) -> Vec<(String, f64)> {
    let q: HashSet<String> = words(query).into_iter().collect();
    let mut scored: Vec<(String, f64)> = brute_bm25(docs, query, k1, b)
        .into_iter()
        .zip(docs)
        .filter(|(_, (_, text))| words(text).iter().any(|w| q.contains(w)))
        .map(|(s, _)| s)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

pub const VOCAB: usize = 40;

/// A random corpus over a small skewed vocabulary `w0..w39`.
pub fn random_docs(rng: &mut ChaCha8Rng, n: usize) -> Vec<(String, String)> {
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..=30);
            let text: Vec<String> = (0..len).map(|_| random_word(rng)).collect();
            (format!("doc{i:03}"), text.join(" "))
        })
        .collect()
}

pub fn random_word(rng: &mut ChaCha8Rng) -> String {
    // Squaring a uniform draw favors low word ids.
    let u: f64 = rng.random();
    format!("w{}", ((u * u) * VOCAB as f64) as usize)
}

pub fn random_query(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..=4);
    (0..len).map(|_| random_word(rng)).collect::<Vec<_>>().join(" ")
}

pub fn build(docs: &[(String, String)]) -> (DocumentStore, InvertedIndex) {
    let store = DocumentStore::from_documents(docs.iter().map(|(id, t)| Document::new(id.clone(), t.clone()))).unwrap();
    let index = InvertedIndex::build(&store, Tokenizer::default(), Bm25Params::default()).unwrap();
    (store, index)
}

/// Synthetic retrieval benchmark: every query has exactly one relevant
/// document, which contains the query's marker term with probability ~0.7.
pub struct Synthetic {
    pub docs: Vec<(String, String)>,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
}

pub fn synthetic(seed: u64, n_docs: usize, n_queries: usize) -> Synthetic {
    let mut r = rng(seed);
    let mut docs = random_docs(&mut r, n_docs);
    let mut queries = Vec::new();
    let mut qrels = Qrels::new();
    for q in 0..n_queries {
        let rel = r.random_range(0..n_docs);
        let marker = format!("topic{q}");
        if r.random_bool(0.7) {
            docs[rel].1.push(' ');
            docs[rel].1.push_str(&marker);
        }
        let qid = format!("q{q}");
        queries.push(Query::new(qid.clone(), format!("{marker} {}", random_query(&mut r))));
        qrels.insert(&qid, &docs[rel].0, 1);
    }
    Synthetic { docs, queries, qrels }
}

/// Random off-diagonal probabilities; some cells land exactly on 0.5 so the
/// strict threshold of Binary is exercised.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        f64::NAN
                    } else if rng.random_bool(0.1) {
                        0.5
                    } else {
                        rng.random()
                    }
                })
                .collect()
        })
        .collect()
}

/// Reference aggregation of one row over partner set `js` (ascending).
pub fn brute_row(p: &[Vec<f64>], i: usize, js: &[usize], method: &str) -> f64 {
    match method {
        "sum" | "sample" => {
            let mut s = 0.0;
            for &j in js {
                s += p[i][j];
            }
            s
        }
        "binary" => js.iter().filter(|&&j| p[i][j] > 0.5).count() as f64,
        "min" => {
            let mut best = f64::INFINITY;
            for &j in js {
                if p[i][j] < best {
                    best = p[i][j];
                }
            }
            best
        }
        "max" => {
            let mut best = f64::NEG_INFINITY;
            for &j in js {
                if p[i][j] > best {
                    best = p[i][j];
                }
            }
            best
        }
        other => panic!("unknown method {other}"),
    }
}

/// Per-query reference metrics from a ranked doc list and relevant set.
pub struct RefMetrics {
    pub rr10: f64,
    pub ap: f64,
    pub recall: BTreeMap<usize, f64>,
}

pub fn reference_metrics(ranked: &[String], relevant: &HashSet<String>, ks: &[usize]) -> RefMetrics {
    let mut rr10 = 0.0;
    for (r, d) in ranked.iter().enumerate().take(10) {
        if relevant.contains(d) {
            rr10 = 1.0 / (r as f64 + 1.0);
            break;
        }
    }
    let mut precisions = Vec::new();
    for (r, d) in ranked.iter().enumerate() {
        if relevant.contains(d) {
            let hits_so_far = ranked[..=r].iter().filter(|x| relevant.contains(*x)).count();
            precisions.push(hits_so_far as f64 / (r + 1) as f64);
        }
    }
    let ap = precisions.iter().sum::<f64>() / relevant.len() as f64;
    let recall = ks
        .iter()
        .map(|&k| {
            let hits = ranked.iter().take(k).filter(|d| relevant.contains(*d)).count();
            (k, hits as f64 / relevant.len() as f64)
        })
        .collect();
    RefMetrics { rr10, ap, recall }
}

/// Random run + qrels fixture in TREC text form. Returns the run text, the
/// qrels text, and the ranked lists / relevant sets used to build them.
pub struct MetricFixture {
    pub run_text: String,
    pub qrels_text: String,
    pub ranked: BTreeMap<String, Vec<String>>,
    pub relevant: BTreeMap<String, HashSet<String>>,
}

pub fn metric_fixture(rng: &mut ChaCha8Rng) -> MetricFixture {
    let n_queries = rng.random_range(1..=20);
    let mut fx = MetricFixture {
        run_text: String::new(),
        qrels_text: String::new(),
        ranked: BTreeMap::new(),
        relevant: BTreeMap::new(),
    };
    for q in 0..n_queries {
        let qid = format!("q{q}");
        let pool = rng.random_range(5..=100);
        let n_rel = rng.random_range(1..=4.min(pool));
        let mut rel = HashSet::new();
        while rel.len() < n_rel {
            rel.insert(format!("d{}", rng.random_range(0..pool)));
        }
        for d in &rel {
            fx.qrels_text += &format!("{qid} 0 {d} {}\n", rng.random_range(1..=3));
        }
        // A few explicit non-relevant judgments.
        for _ in 0..3 {
            let d = format!("d{}", rng.random_range(0..pool));
            if !rel.contains(&d) && !fx.qrels_text.contains(&format!("{qid} 0 {d} ")) {
                fx.qrels_text += &format!("{qid} 0 {d} 0\n");
            }
        }
        let mut ids: Vec<String> = (0..pool).map(|i| format!("d{i}")).collect();
        for i in (1..ids.len()).rev() {
            let j = rng.random_range(0..=i);
            ids.swap(i, j);
        }
        ids.truncate(rng.random_range(0..=pool));
        // Some judged queries are missing from the run entirely.
        if rng.random_bool(0.9) {
            for (r, d) in ids.iter().enumerate() {
                fx.run_text += &format!("{qid} Q0 {d} {} {} fx\n", r + 1, 1000 - r);
            }
            fx.ranked.insert(qid.clone(), ids);
        } else {
            fx.ranked.insert(qid.clone(), Vec::new());
        }
        fx.relevant.insert(qid, rel);
    }
    fx
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Deterministic pseudo-random scorer: each (query, doc) or (query, i, j)
/// gets a fixed value in [0, 1] derived from a hash of the ids.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashScorer {
    pub salt: u64,
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

impl cascade_core::PointwiseScorer for HashScorer {
    fn score_batch(&self, query: &Query, docs: &[&Document]) -> Result<Vec<f64>, cascade_core::ScoreError> {
        use cascade_core::seed::derive_seed;
        Ok(docs
            .iter()
            .map(|d| unit(derive_seed(self.salt, &[query.query_id.as_bytes(), d.doc_id.as_bytes()])))
            .collect())
    }
}

impl cascade_core::PairwiseScorer for HashScorer {
    fn score_pairs(
        &self,
        query: &Query,
        pairs: &[(&Document, &Document)],
    ) -> Result<Vec<f64>, cascade_core::ScoreError> {
        use cascade_core::seed::derive_seed;
        Ok(pairs
            .iter()
            .map(|(a, b)| {
                unit(derive_seed(
                    self.salt,
                    &[query.query_id.as_bytes(), a.doc_id.as_bytes(), b.doc_id.as_bytes()],
                ))
            })
            .collect())
    }
}
