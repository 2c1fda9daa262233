//! Multi-stage ranking cascade.
//!
//! A query flows through three stages: BM25 retrieval keeps `k0` candidates,
//! a pointwise scorer re-ranks them and keeps `k1`, and a pairwise scorer
//! compares those `k1` documents against each other and aggregates the pair
//! probabilities into a final order. Every scorer invocation is tallied in a
//! [`CostLedger`].

pub mod corpus;
pub mod duo;
pub mod index;
pub mod metrics;
pub mod mono;
pub mod pipeline;
pub mod ranking;
pub mod remote;
pub mod run;
pub mod scorer;
pub mod seed;
pub mod sweep;
pub mod toy;

pub use corpus::{CorpusError, Document, DocumentStore, Qrels, Query};
pub use duo::{aggregate, AggregationMethod, DuoError, PairMatrix};
pub use index::{Bm25Params, IndexError, InvertedIndex, Tokenizer, TokenizerConfig};
pub use metrics::{Metric, MetricReport, MetricScores};
pub use pipeline::{CostLedger, Pipeline, PipelineError, PipelineResult, StageBudget};
pub use ranking::{Candidate, RankedList};
pub use remote::{RemoteClient, RemoteDuoScorer, RemoteError, RemoteMonoScorer, ScorerEndpoint};
pub use run::{RunError, RunFile};
pub use scorer::{PairwiseScorer, PointwiseScorer, QrelsOracle, ScoreError, StageError};
pub use sweep::{CostAxis, SweepGrid, SweepPoint};
