//! Turning `--mono` / `--duo` choices into scorers.
//!
//! A scorer choice is `oracle` (qrels lookup), `toy:<model file>`, or `remote:<url>`.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cascade_core::corpus::Qrels;
use cascade_core::remote::{RemoteClient, RemoteDuoScorer, RemoteMonoScorer, ScorerEndpoint};
use cascade_core::scorer::{PairwiseScorer, PointwiseScorer, QrelsOracle};
use cascade_core::toy::{ToyDuoScorer, ToyMonoScorer, ToyPairwiseModel, ToyPointwiseModel};
use cascade_core::InvertedIndex;

#[derive(Debug, Clone, PartialEq)]
pub enum ScorerChoice {
    Oracle,
    Toy(PathBuf),
    Remote(String),
}

impl std::str::FromStr for ScorerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "oracle" {
            return Ok(ScorerChoice::Oracle);
        }
        if let Some(path) = s.strip_prefix("toy:") {
            if path.is_empty() {
                return Err("toy: needs a model file".into());
            }
            return Ok(ScorerChoice::Toy(path.into()));
        }
        if let Some(url) = s.strip_prefix("remote:") {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(format!("remote: expects an http(s) URL, got {url:?}"));
            }
            return Ok(ScorerChoice::Remote(url.to_string()));
        }
        Err(format!("expected oracle, toy:<model> or remote:<url>, got {s:?}"))
    }
}

impl ScorerChoice {
    pub fn model_path(&self) -> Option<&PathBuf> {
        match self {
            ScorerChoice::Toy(p) => Some(p),
            _ => None,
        }
    }
}

/// Connection settings shared by remote scorers.
#[derive(Debug, Clone, clap::Args)]
pub struct RemoteOpts {
    /// Items per request to a remote scorer.
    #[arg(long, default_value_t = 64)]
    pub remote_batch: usize,
    /// Per-request timeout in milliseconds.
    #[arg(long, default_value_t = 30_000)]
    pub remote_timeout_ms: u64,
    /// Retries after a timeout, connection failure or 5xx response.
    #[arg(long, default_value_t = 2)]
    pub remote_retries: usize,
    /// Requests in flight per scoring call.
    #[arg(long, default_value_t = 4)]
    pub remote_concurrency: usize,
}

impl RemoteOpts {
    fn client(&self, url: &str) -> Result<RemoteClient> {
        let endpoint = ScorerEndpoint {
            max_batch: self.remote_batch,
            timeout: Duration::from_millis(self.remote_timeout_ms),
            retries: self.remote_retries,
            concurrency: self.remote_concurrency,
            ..ScorerEndpoint::new(url)
        };
        Ok(RemoteClient::new(endpoint)?)
    }
}

fn oracle(qrels: Option<&Qrels>, flag: &str) -> Result<QrelsOracle> {
    match qrels {
        Some(q) => Ok(QrelsOracle::new(q.clone())),
        None => bail!("{flag} oracle needs --qrels"),
    }
}

pub fn mono(
    choice: &ScorerChoice,
    index: &Arc<InvertedIndex>,
    qrels: Option<&Qrels>,
    remote: &RemoteOpts,
) -> Result<Box<dyn PointwiseScorer>> {
    Ok(match choice {
        ScorerChoice::Oracle => Box::new(oracle(qrels, "--mono")?),
        ScorerChoice::Toy(path) => Box::new(ToyMonoScorer {
            model: ToyPointwiseModel::load(path).with_context(|| format!("loading {}", path.display()))?,
            index: index.clone(),
        }),
        ScorerChoice::Remote(url) => Box::new(
            RemoteMonoScorer::connect(remote.client(url)?, index.tokenizer().clone())
                .with_context(|| format!("connecting to {url}"))?,
        ),
    })
}

pub fn duo(
    choice: &ScorerChoice,
    index: &Arc<InvertedIndex>,
    qrels: Option<&Qrels>,
    remote: &RemoteOpts,
) -> Result<Box<dyn PairwiseScorer>> {
    Ok(match choice {
        ScorerChoice::Oracle => Box::new(oracle(qrels, "--duo")?),
        ScorerChoice::Toy(path) => Box::new(ToyDuoScorer {
            model: ToyPairwiseModel::load(path).with_context(|| format!("loading {}", path.display()))?,
            index: index.clone(),
        }),
        ScorerChoice::Remote(url) => Box::new(
            RemoteDuoScorer::connect(remote.client(url)?, index.tokenizer().clone())
                .with_context(|| format!("connecting to {url}"))?,
        ),
    })
}
