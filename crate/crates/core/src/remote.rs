//! Client for an external scoring service.
//!
//! Wire protocol (JSON, UTF-8):
//!
//! ```text
//! GET  /v1/health -> {"modes": ["mono", "duo"], "token_budget": 512}
//! POST /v1/score  <- {"query_id": "...", "query_text": "...", "mode": "mono",
//!                     "items": [{"doc_id": "...", "text": "..."}]}
//!                 <- {..., "mode": "duo",
//!                     "items": [{"i_doc_id": "...", "i_text": "...",
//!                                "j_doc_id": "...", "j_text": "..."}]}
//!                 -> {"scores": [0.93, ...]}
//! ```
//!
//! Items are sent in batches of at most `max_batch`; several batches may be
//! in flight at once and are reassembled by batch index. `token_budget` is
//! optional; when a service declares one it truncates inputs itself and the
//! client sends texts unmodified.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Query};
use crate::duo::DuoTruncation;
use crate::index::Tokenizer;
use crate::mono::{truncate_text, MonoTruncation};
use crate::scorer::{PairwiseScorer, PointwiseScorer, ScoreError};

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub max_batch: usize,
    pub retries: usize,
    /// Maximum batches in flight per call.
    pub concurrency: usize,
}

impl ScorerEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout: Duration::from_secs(30),
            max_batch: 64,
            retries: 2,
            concurrency: 4,
        }
    }

    pub fn validate(&self) -> Result<(), RemoteError> {
        if self.max_batch == 0 {
            return Err(RemoteError::Config("max_batch must be at least 1".into()));
        }
        if self.timeout.is_zero() {
            return Err(RemoteError::Config("timeout must be positive".into()));
        }
        if self.concurrency == 0 {
            return Err(RemoteError::Config("concurrency must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mono,
    Duo,
}

impl Mode {
    fn as_str(&self) -> &'static str {
        match self {
            Mode::Mono => "mono",
            Mode::Duo => "duo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoItem {
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuoItem {
    pub i_doc_id: String,
    pub i_text: String,
    pub j_doc_id: String,
    pub j_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreItem {
    Duo(DuoItem),
    Mono(MonoItem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub query_id: String,
    pub query_text: String,
    pub mode: Mode,
    pub items: Vec<ScoreItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub modes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_budget: Option<usize>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ServiceDescriptor {
    pub fn supports(&self, mode: Mode) -> bool {
        self.modes.iter().any(|m| m == mode.as_str())
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum RemoteError {
    #[error("transport error talking to {url}: {msg}")]
    Transport { url: String, msg: String },
    #[error("{url} returned HTTP {status}: {body}")]
    Http { url: String, status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("service returned {got} scores for {expected} items")]
    LengthMismatch { expected: usize, got: usize },
    #[error("service score {value} at item {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("scorer configuration: {0}")]
    Config(String),
}

impl RemoteError {
    fn retryable(&self) -> bool {
        match self {
            RemoteError::Transport { .. } => true,
            RemoteError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteClient {
    endpoint: ScorerEndpoint,
    http: reqwest::blocking::Client,
}

impl RemoteClient {
    pub fn new(endpoint: ScorerEndpoint) -> Result<Self, RemoteError> {
        endpoint.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(endpoint.timeout)
            .build()
            .map_err(|e| RemoteError::Config(e.to_string()))?;
        Ok(Self { endpoint, http })
    }

    pub fn endpoint(&self) -> &ScorerEndpoint {
        &self.endpoint
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.endpoint.base_url)
    }

    fn transport(&self, url: &str, e: reqwest::Error) -> RemoteError {
        RemoteError::Transport {
            url: url.to_string(),
            msg: e.to_string(),
        }
    }

    pub fn health_check(&self) -> Result<ServiceDescriptor, RemoteError> {
        let url = self.url("/v1/health");
        let resp = self.http.get(&url).send().map_err(|e| self.transport(&url, e))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| self.transport(&url, e))?;
        if !status.is_success() {
            return Err(RemoteError::Http {
                url,
                status: status.as_u16(),
                body,
            });
        }
        serde_json::from_str(&body).map_err(|e| RemoteError::Protocol(format!("health descriptor: {e}")))
    }

    fn post_once(&self, req: &ScoreRequest) -> Result<Vec<f64>, RemoteError> {
        let url = self.url("/v1/score");
        let body = serde_json::to_string(req).map_err(|e| RemoteError::Protocol(e.to_string()))?;
        let resp = self
            .http
            .post(&url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body)
            .send()
            .map_err(|e| self.transport(&url, e))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| self.transport(&url, e))?;
        if !status.is_success() {
            return Err(RemoteError::Http {
                url,
                status: status.as_u16(),
                body: text,
            });
        }
        let parsed: ScoreResponse =
            serde_json::from_str(&text).map_err(|e| RemoteError::Protocol(format!("score response: {e}")))?;
        Ok(parsed.scores)
    }

    fn post_with_retry(&self, req: &ScoreRequest) -> Result<Vec<f64>, RemoteError> {
        let mut attempt = 0;
        loop {
            match self.post_once(req) {
                Err(e) if e.retryable() && attempt < self.endpoint.retries => {
                    attempt += 1;
                    log::warn!("retrying batch for {} (attempt {attempt}): {e}", req.query_id);
                }
                other => return other,
            }
        }
    }

    /// Scores `items` in order, batching and validating every response.
    pub fn score(&self, query: &Query, mode: Mode, items: Vec<ScoreItem>) -> Result<Vec<f64>, RemoteError> {
        let total = items.len();
        let requests: Vec<ScoreRequest> = items
            .chunks(self.endpoint.max_batch)
            .map(|chunk| ScoreRequest {
                query_id: query.query_id.clone(),
                query_text: query.text.clone(),
                mode,
                items: chunk.to_vec(),
            })
            .collect();
        let mut scores = Vec::with_capacity(total);
        for wave in requests.chunks(self.endpoint.concurrency) {
            let results: Vec<Result<Vec<f64>, RemoteError>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|r| s.spawn(move || self.post_with_retry(r))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(RemoteError::Protocol("worker panicked".into()))))
                    .collect()
            });
            for (req, res) in wave.iter().zip(results) {
                let batch = res?;
                if batch.len() != req.items.len() {
                    return Err(RemoteError::LengthMismatch {
                        expected: total,
                        got: total - req.items.len() + batch.len(),
                    });
                }
                scores.extend(batch);
            }
        }
        if let Some(index) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(RemoteError::OutOfRange {
                index,
                value: scores[index],
            });
        }
        Ok(scores)
    }

    pub fn score_remote_mono(&self, query: &Query, candidates: &[MonoItem]) -> Result<Vec<f64>, RemoteError> {
        self.score(query, Mode::Mono, candidates.iter().cloned().map(ScoreItem::Mono).collect())
    }

    pub fn score_remote_duo(&self, query: &Query, pairs: &[DuoItem]) -> Result<Vec<f64>, RemoteError> {
        self.score(query, Mode::Duo, pairs.iter().cloned().map(ScoreItem::Duo).collect())
    }
}

/// Checks the service supports `mode`; returns the descriptor.
fn connect(client: &RemoteClient, mode: Mode) -> Result<ServiceDescriptor, RemoteError> {
    let desc = client.health_check()?;
    if !desc.supports(mode) {
        return Err(RemoteError::Config(format!(
            "service at {} does not support {} scoring (modes: {:?})",
            client.endpoint.base_url,
            mode.as_str(),
            desc.modes
        )));
    }
    Ok(desc)
}

/// Pointwise scorer that delegates to a remote service.
#[derive(Debug, Clone)]
pub struct RemoteMonoScorer {
    client: RemoteClient,
    /// Present when the client truncates inputs before sending.
    local_truncation: Option<Arc<Tokenizer>>,
    pub descriptor: ServiceDescriptor,
}

impl RemoteMonoScorer {
    /// Health-checks the service. Inputs are truncated locally with
    /// `tokenizer` unless the service declares its own token budget.
    pub fn connect(client: RemoteClient, tokenizer: Tokenizer) -> Result<Self, RemoteError> {
        let descriptor = connect(&client, Mode::Mono)?;
        Ok(Self {
            local_truncation: descriptor.token_budget.is_none().then(|| Arc::new(tokenizer)),
            client,
            descriptor,
        })
    }

    pub fn truncates_locally(&self) -> bool {
        self.local_truncation.is_some()
    }

    fn prepare(&self, query: &Query, doc: &Document) -> (String, MonoItem) {
        let (q, d) = match &self.local_truncation {
            Some(tok) => {
                let limits = MonoTruncation::default();
                let q = truncate_text(tok, &query.text, limits.max_query_tokens);
                let q_len = tok.spans(q).count();
                let budget = limits.max_total_tokens - limits.reserved - q_len;
                (q, truncate_text(tok, &doc.text, budget))
            }
            None => (query.text.as_str(), doc.text.as_str()),
        };
        (
            q.to_string(),
            MonoItem {
                doc_id: doc.doc_id.clone(),
                text: d.to_string(),
            },
        )
    }
}

impl PointwiseScorer for RemoteMonoScorer {
    fn score_batch(&self, query: &Query, docs: &[&Document]) -> Result<Vec<f64>, ScoreError> {
        let mut q_text = query.text.clone();
        let items: Vec<MonoItem> = docs
            .iter()
            .map(|d| {
                let (q, item) = self.prepare(query, d);
                q_text = q;
                item
            })
            .collect();
        let q = Query::new(query.query_id.clone(), q_text);
        Ok(self.client.score_remote_mono(&q, &items)?)
    }
}

/// Pairwise scorer that delegates to a remote service.
#[derive(Debug, Clone)]
pub struct RemoteDuoScorer {
    client: RemoteClient,
    local_truncation: Option<Arc<Tokenizer>>,
    pub descriptor: ServiceDescriptor,
}

impl RemoteDuoScorer {
    pub fn connect(client: RemoteClient, tokenizer: Tokenizer) -> Result<Self, RemoteError> {
        let descriptor = connect(&client, Mode::Duo)?;
        Ok(Self {
            local_truncation: descriptor.token_budget.is_none().then(|| Arc::new(tokenizer)),
            client,
            descriptor,
        })
    }

    pub fn truncates_locally(&self) -> bool {
        self.local_truncation.is_some()
    }
}

impl PairwiseScorer for RemoteDuoScorer {
    fn score_pairs(&self, query: &Query, pairs: &[(&Document, &Document)]) -> Result<Vec<f64>, ScoreError> {
        let limits = DuoTruncation::default();
        let cut = |text: &'_ str, keep: usize| -> String {
            match &self.local_truncation {
                Some(tok) => truncate_text(tok, text, keep).to_string(),
                None => text.to_string(),
            }
        };
        let q = Query::new(query.query_id.clone(), cut(&query.text, limits.max_query));
        let items: Vec<DuoItem> = pairs
            .iter()
            .map(|(a, b)| DuoItem {
                i_doc_id: a.doc_id.clone(),
                i_text: cut(&a.text, limits.max_doc_each),
                j_doc_id: b.doc_id.clone(),
                j_text: cut(&b.text, limits.max_doc_each),
            })
            .collect();
        Ok(self.client.score_remote_duo(&q, &items)?)
    }
}
