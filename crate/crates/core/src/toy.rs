//! Small trainable stand-ins for the neural re-rankers.
//!
//! Both models are logistic regressions over four lexical features of a
//! (query, document) pair: query-term overlap count, BM25 score, the
//! document/query length ratio, and a bias. The pointwise model scores
//! `σ(w · x)`; the pairwise model scores `σ(w · (x_i − x_j))`, which makes
//! `p[i][j] + p[j][i] = 1` hold structurally.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Query};
use crate::duo::{pairwise_loss, DuoTruncation, PairMatrix};
use crate::index::{Bm25Params, InvertedIndex};
use crate::mono::{pointwise_loss, MonoTruncation, PROB_EPS};
use crate::scorer::{PairwiseScorer, PointwiseScorer, ScoreError};

pub const NUM_FEATURES: usize = 4;
pub type Features = [f64; NUM_FEATURES];

const MODEL_FORMAT: &str = "cascade-toy-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training data must contain both relevant and non-relevant examples")]
    SingleClass,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

/// Logistic function evaluated so that `sigmoid(-x) == 1 - sigmoid(x)` exactly.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        1.0 - 1.0 / (1.0 + x.exp())
    }
}

fn dot(w: &Features, x: &Features) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Raw features for already-tokenized, already-truncated inputs.
pub fn raw_features(index: &InvertedIndex, params: Bm25Params, query: &[String], doc: &[String]) -> Features {
    let doc_terms: HashSet<&str> = doc.iter().map(String::as_str).collect();
    let overlap = query.iter().filter(|t| doc_terms.contains(t.as_str())).count() as f64;
    let bm25 = index.bm25_for_tokens(query, doc, params);
    let ratio = doc.len() as f64 / query.len().max(1) as f64;
    [overlap, bm25, ratio, 1.0]
}

/// Per-feature centering and scaling, fitted once per training run. The bias
/// feature is left untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Features,
    pub scale: Features,
}

impl Default for Standardizer {
    fn default() -> Self {
        Self {
            mean: [0.0; NUM_FEATURES],
            scale: [1.0; NUM_FEATURES],
        }
    }
}

impl Standardizer {
    pub fn fit(rows: &[Features]) -> Self {
        let mut s = Self::default();
        if rows.is_empty() {
            return s;
        }
        let n = rows.len() as f64;
        for k in 0..NUM_FEATURES - 1 {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            s.mean[k] = mean;
            s.scale[k] = if var > 1e-12 { var.sqrt() } else { 1.0 };
        }
        s
    }

    pub fn transform(&self, x: &Features) -> Features {
        std::array::from_fn(|k| (x[k] - self.mean[k]) / self.scale[k])
    }

    /// Scales a feature difference; the means cancel.
    pub fn transform_diff(&self, a: &Features, b: &Features) -> Features {
        std::array::from_fn(|k| (a[k] - b[k]) / self.scale[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            iterations: 500,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// A judged (query, document) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub query_id: String,
    pub query: String,
    pub doc: String,
    pub label: u8,
}

/// An ordered document pair; `label` is 1 when `doc_i` is the relevant one.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub query: String,
    pub doc_i: String,
    pub doc_j: String,
    pub label: u8,
}

/// Every (relevant, non-relevant) combination per query, in both orientations.
pub fn pairwise_examples(rows: &[LabeledExample]) -> Vec<PairExample> {
    let mut by_query: Vec<(&str, Vec<&LabeledExample>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for r in rows {
        let k = *slot.entry(&r.query_id).or_insert_with(|| {
            by_query.push((&r.query_id, Vec::new()));
            by_query.len() - 1
        });
        by_query[k].1.push(r);
    }
    let mut out = Vec::new();
    for (_, group) in by_query {
        for pos in group.iter().filter(|r| r.label == 1) {
            for neg in group.iter().filter(|r| r.label == 0) {
                out.push(PairExample {
                    query: pos.query.clone(),
                    doc_i: pos.doc.clone(),
                    doc_j: neg.doc.clone(),
                    label: 1,
                });
                out.push(PairExample {
                    query: pos.query.clone(),
                    doc_i: neg.doc.clone(),
                    doc_j: pos.doc.clone(),
                    label: 0,
                });
            }
        }
    }
    out
}

/// Gradient of the summed cross-entropy `Σ −y ln σ(w·x) − (1−y) ln(1 − σ(w·x))`,
/// treating clamped probabilities as constant.
fn bce_gradient(w: &Features, xs: &[Features], labels: &[u8]) -> Features {
    let mut g = [0.0; NUM_FEATURES];
    for (x, &y) in xs.iter().zip(labels) {
        let p = sigmoid(dot(w, x));
        if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
            continue;
        }
        let r = p - y as f64;
        for k in 0..NUM_FEATURES {
            g[k] += r * x[k];
        }
    }
    g
}

/// Plain SGD over balanced batches: each step draws `batch_size / 2`
/// positives and as many negatives, with replacement.
fn sgd(mut w: Features, xs: &[Features], labels: &[u8], cfg: &TrainConfig) -> Features {
    let pos: Vec<usize> = (0..xs.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..xs.len()).filter(|&i| labels[i] == 0).collect();
    let half = (cfg.batch_size / 2).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bx = Vec::with_capacity(2 * half);
    let mut by = Vec::with_capacity(2 * half);
    for _ in 0..cfg.iterations {
        bx.clear();
        by.clear();
        for _ in 0..half {
            let i = pos[rng.random_range(0..pos.len())];
            let j = neg[rng.random_range(0..neg.len())];
            bx.extend([xs[i], xs[j]]);
            by.extend([1u8, 0u8]);
        }
        let g = bce_gradient(&w, &bx, &by);
        let scale = cfg.lr / bx.len() as f64;
        for k in 0..NUM_FEATURES {
            w[k] -= scale * g[k];
        }
    }
    w
}

fn check_training(labels: &[u8], cfg: &TrainConfig) -> Result<(), TrainError> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(TrainError::Config(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if cfg.batch_size < 2 {
        return Err(TrainError::Config("batch size must be at least 2".into()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(TrainError::Config(format!("label must be 0 or 1, got {bad}")));
    }
    if !labels.contains(&1) || !labels.contains(&0) {
        return Err(TrainError::SingleClass);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPointwiseModel {
    pub weights: Features,
    pub standardizer: Option<Standardizer>,
    pub bm25: Bm25Params,
}

impl Default for ToyPointwiseModel {
    fn default() -> Self {
        Self {
            weights: [0.0; NUM_FEATURES],
            standardizer: None,
            bm25: Bm25Params::default(),
        }
    }
}

impl ToyPointwiseModel {
    /// Raw features of (query, doc) after pointwise truncation.
    pub fn features(&self, index: &InvertedIndex, query: &str, doc: &str) -> Features {
        let tok = index.tokenizer();
        let (q, d) = (tok.tokenize(query), tok.tokenize(doc));
        let (q, d) = MonoTruncation::default().apply(&q, &d);
        raw_features(index, self.bm25, q, d)
    }

    fn standardize(&self, x: &Features) -> Features {
        match &self.standardizer {
            Some(s) => s.transform(x),
            None => *x,
        }
    }

    pub fn score_features(&self, raw: &Features) -> f64 {
        sigmoid(dot(&self.weights, &self.standardize(raw)))
    }

    /// Summed cross-entropy over raw feature rows.
    pub fn loss_on(&self, raw: &[Features], labels: &[u8]) -> f64 {
        let scores: Vec<f64> = raw.iter().map(|x| self.score_features(x)).collect();
        pointwise_loss(&scores, labels).expect("labels are 0/1 and aligned")
    }

    /// Analytic gradient of [`Self::loss_on`] with respect to the weights.
    pub fn gradient_on(&self, raw: &[Features], labels: &[u8]) -> Features {
        let xs: Vec<Features> = raw.iter().map(|x| self.standardize(x)).collect();
        bce_gradient(&self.weights, &xs, labels)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        save_model(path, "mono", &self.weights, self.standardizer.as_ref(), self.bm25)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let f = load_model(path, "mono")?;
        Ok(Self {
            weights: f.weights,
            standardizer: f.standardizer,
            bm25: f.bm25,
        })
    }
}

pub fn train_toy_pointwise(
    model: &ToyPointwiseModel,
    index: &InvertedIndex,
    data: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<ToyPointwiseModel, TrainError> {
    let labels: Vec<u8> = data.iter().map(|e| e.label).collect();
    check_training(&labels, cfg)?;
    if cfg.iterations == 0 {
        return Ok(model.clone());
    }
    let raw: Vec<Features> = data.iter().map(|e| model.features(index, &e.query, &e.doc)).collect();
    let mut out = model.clone();
    let standardizer = out.standardizer.get_or_insert_with(|| Standardizer::fit(&raw)).clone();
    let xs: Vec<Features> = raw.iter().map(|x| standardizer.transform(x)).collect();
    out.weights = sgd(out.weights, &xs, &labels, cfg);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPairwiseModel {
    pub weights: Features,
    pub standardizer: Option<Standardizer>,
    pub bm25: Bm25Params,
}

impl Default for ToyPairwiseModel {
    fn default() -> Self {
        Self {
            weights: [0.0; NUM_FEATURES],
            standardizer: None,
            bm25: Bm25Params::default(),
        }
    }
}

impl ToyPairwiseModel {
    /// Raw features of (query, doc) after pairwise truncation of the query
    /// and one document.
    pub fn features(&self, index: &InvertedIndex, query: &str, doc: &str) -> Features {
        let tok = index.tokenizer();
        let (q, d) = (tok.tokenize(query), tok.tokenize(doc));
        let (q, d, _) = DuoTruncation::default().apply(&q, &d, &[]);
        raw_features(index, self.bm25, q, d)
    }

    fn diff(&self, a: &Features, b: &Features) -> Features {
        match &self.standardizer {
            Some(s) => s.transform_diff(a, b),
            None => std::array::from_fn(|k| a[k] - b[k]),
        }
    }

    pub fn prob(&self, raw_i: &Features, raw_j: &Features) -> f64 {
        sigmoid(dot(&self.weights, &self.diff(raw_i, raw_j)))
    }

    /// Full pair matrix over candidates with the given raw features.
    pub fn matrix(&self, raw: &[Features]) -> PairMatrix {
        PairMatrix::from_fn(raw.len(), |i, j| self.prob(&raw[i], &raw[j]))
    }

    /// Pairwise cross-entropy over all mixed-relevance ordered pairs.
    pub fn loss_on(&self, raw: &[Features], labels: &[u8]) -> Result<f64, crate::duo::DuoError> {
        pairwise_loss(&self.matrix(raw), labels)
    }

    /// Analytic gradient of [`Self::loss_on`] with respect to the weights.
    pub fn gradient_on(&self, raw: &[Features], labels: &[u8]) -> Features {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                if i != j && (labels[i] >= 1) != (labels[j] >= 1) {
                    xs.push(self.diff(&raw[i], &raw[j]));
                    ys.push(u8::from(labels[i] >= 1));
                }
            }
        }
        bce_gradient(&self.weights, &xs, &ys)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        save_model(path, "duo", &self.weights, self.standardizer.as_ref(), self.bm25)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let f = load_model(path, "duo")?;
        Ok(Self {
            weights: f.weights,
            standardizer: f.standardizer,
            bm25: f.bm25,
        })
    }
}

pub fn train_toy_pairwise(
    model: &ToyPairwiseModel,
    index: &InvertedIndex,
    data: &[PairExample],
    cfg: &TrainConfig,
) -> Result<ToyPairwiseModel, TrainError> {
    let labels: Vec<u8> = data.iter().map(|e| e.label).collect();
    check_training(&labels, cfg)?;
    if cfg.iterations == 0 {
        return Ok(model.clone());
    }
    let mut cache: HashMap<(&str, &str), Features> = HashMap::new();
    let feat = |q: &'_ str, d: &'_ str| -> Features { model.features(index, q, d) };
    let pairs: Vec<(Features, Features)> = data
        .iter()
        .map(|e| {
            let a = *cache
                .entry((e.query.as_str(), e.doc_i.as_str()))
                .or_insert_with(|| feat(&e.query, &e.doc_i));
            let b = *cache
                .entry((e.query.as_str(), e.doc_j.as_str()))
                .or_insert_with(|| feat(&e.query, &e.doc_j));
            (a, b)
        })
        .collect();
    let mut out = model.clone();
    if out.standardizer.is_none() {
        let rows: Vec<Features> = cache.values().copied().collect();
        out.standardizer = Some(Standardizer::fit(&rows));
    }
    let xs: Vec<Features> = pairs.iter().map(|(a, b)| out.diff(a, b)).collect();
    out.weights = sgd(out.weights, &xs, &labels, cfg);
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: String,
    weights: Features,
    standardizer: Option<Standardizer>,
    bm25: Bm25Params,
}

fn save_model(
    path: &Path,
    kind: &str,
    weights: &Features,
    standardizer: Option<&Standardizer>,
    bm25: Bm25Params,
) -> Result<(), TrainError> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        kind: kind.into(),
        weights: *weights,
        standardizer: standardizer.cloned(),
        bm25,
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| TrainError::ModelFile(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|e| TrainError::ModelFile(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path, kind: &str) -> Result<ModelFile, TrainError> {
    let raw = std::fs::read_to_string(path).map_err(|e| TrainError::ModelFile(format!("{}: {e}", path.display())))?;
    let file: ModelFile =
        serde_json::from_str(&raw).map_err(|e| TrainError::ModelFile(format!("{}: {e}", path.display())))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(TrainError::ModelFile(format!(
            "{}: unsupported format {:?} version {}",
            path.display(),
            file.format,
            file.version
        )));
    }
    if file.kind != kind {
        return Err(TrainError::ModelFile(format!(
            "{}: expected a {kind} model, found {}",
            path.display(),
            file.kind
        )));
    }
    Ok(file)
}

/// Pointwise scorer backed by a [`ToyPointwiseModel`].
#[derive(Debug, Clone)]
pub struct ToyMonoScorer {
    pub model: ToyPointwiseModel,
    pub index: Arc<InvertedIndex>,
}

impl PointwiseScorer for ToyMonoScorer {
    fn score_batch(&self, query: &Query, docs: &[&Document]) -> Result<Vec<f64>, ScoreError> {
        Ok(docs
            .iter()
            .map(|d| self.model.score_features(&self.model.features(&self.index, &query.text, &d.text)))
            .collect())
    }
}

/// Pairwise scorer backed by a [`ToyPairwiseModel`].
#[derive(Debug, Clone)]
pub struct ToyDuoScorer {
    pub model: ToyPairwiseModel,
    pub index: Arc<InvertedIndex>,
}

impl PairwiseScorer for ToyDuoScorer {
    fn score_pairs(&self, query: &Query, pairs: &[(&Document, &Document)]) -> Result<Vec<f64>, ScoreError> {
        let mut cache: HashMap<String, Features> = HashMap::new();
        let mut feat = |d: &Document| -> Features {
            *cache
                .entry(d.doc_id.clone())
                .or_insert_with(|| self.model.features(&self.index, &query.text, &d.text))
        };
        Ok(pairs
            .iter()
            .map(|(a, b)| {
                let (fa, fb) = (feat(a), feat(b));
                self.model.prob(&fa, &fb)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocumentStore;
    use crate::index::Tokenizer;

    #[test]
    fn sigmoid_is_exactly_antisymmetric() {
        for x in [-30.0, -3.7, -0.1, 0.0, 1e-9, 0.25, 2.0, 17.5, 40.0] {
            assert_eq!(sigmoid(x) + sigmoid(-x), 1.0, "x = {x}");
        }
    }

    #[test]
    fn standardizer_ignores_bias_and_constant_columns() {
        let rows = [[1.0, 5.0, 2.0, 1.0], [3.0, 5.0, 4.0, 1.0]];
        let s = Standardizer::fit(&rows);
        assert_eq!(s.mean, [2.0, 5.0, 3.0, 0.0]);
        assert_eq!(s.scale, [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.transform(&rows[0]), [-1.0, 0.0, -1.0, 1.0]);
    }

    fn index() -> InvertedIndex {
        let store = DocumentStore::from_documents(vec![
            Document::new("a", "apple banana"),
            Document::new("b", "cherry date"),
        ])
        .unwrap();
        InvertedIndex::build(&store, Tokenizer::default(), Bm25Params::default()).unwrap()
    }

    #[test]
    fn features_of_simple_pair() {
        let idx = index();
        let m = ToyPointwiseModel::default();
        let f = m.features(&idx, "apple pie", "apple banana");
        assert_eq!(f[0], 1.0);
        assert!(f[1] > 0.0);
        assert_eq!(f[2], 1.0);
        assert_eq!(f[3], 1.0);
        assert_eq!(m.features(&idx, "kiwi", "apple banana")[..2], [0.0, 0.0]);
    }

    #[test]
    fn single_class_data_is_rejected() {
        let idx = index();
        let data = vec![LabeledExample {
            query_id: "q".into(),
            query: "apple".into(),
            doc: "apple banana".into(),
            label: 1,
        }];
        assert!(matches!(
            train_toy_pointwise(&ToyPointwiseModel::default(), &idx, &data, &TrainConfig::default()),
            Err(TrainError::SingleClass)
        ));
    }

    #[test]
    fn pair_construction_both_orientations() {
        let ex = |q: &str, d: &str, l| LabeledExample {
            query_id: q.into(),
            query: q.into(),
            doc: d.into(),
            label: l,
        };
        let pairs = pairwise_examples(&[ex("q1", "r", 1), ex("q1", "n1", 0), ex("q1", "n2", 0), ex("q2", "x", 0)]);
        assert_eq!(pairs.len(), 4);
        assert_eq!(pairs.iter().filter(|p| p.label == 1).count(), 2);
        assert!(pairs.iter().all(|p| (p.label == 1) == (p.doc_i == "r")));
    }

    #[test]
    fn model_file_round_trip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = ToyPointwiseModel {
            weights: [0.5, -1.25, 2.0, 0.1],
            standardizer: Some(Standardizer::default()),
            bm25: Bm25Params::default(),
        };
        m.save(&path).unwrap();
        assert_eq!(ToyPointwiseModel::load(&path).unwrap(), m);
        assert!(matches!(ToyPairwiseModel::load(&path), Err(TrainError::ModelFile(_))));
    }
}
