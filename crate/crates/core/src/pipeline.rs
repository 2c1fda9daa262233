//! Three-stage cascade H0 → H1 → H2 with per-query inference accounting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentStore, Query};
use crate::duo::{rerank_duo, AggregationMethod, PairMatrix, H2_LABEL};
use crate::index::{Bm25Params, InvertedIndex};
use crate::mono::{rerank_mono, H1_LABEL};
use crate::ranking::RankedList;
use crate::scorer::{PairwiseScorer, PointwiseScorer, StageError};

/// Per-stage cutoffs. `k1 = 0` disables the pairwise stage and the pointwise
/// stage then keeps all `k0` candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageBudget {
    pub k0: usize,
    pub k1: usize,
    pub aggregation: AggregationMethod,
}

impl StageBudget {
    pub fn new(k0: usize, k1: usize, aggregation: AggregationMethod) -> Result<Self, PipelineError> {
        let b = Self { k0, k1, aggregation };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k0 == 0 {
            return Err(PipelineError::Config("k0 must be positive".into()));
        }
        if self.k1 > self.k0 {
            return Err(PipelineError::Config(format!("k1 = {} exceeds k0 = {}", self.k1, self.k0)));
        }
        if let AggregationMethod::Sample { m, .. } = self.aggregation {
            if m == 0 {
                return Err(PipelineError::Config("sample size m must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// How many candidates the pointwise stage passes on.
    pub fn mono_keep(&self) -> usize {
        if self.k1 == 0 {
            self.k0
        } else {
            self.k1
        }
    }
}

/// Scorer invocations for one query. BM25 traversal is not an inference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub h0_candidates: usize,
    pub mono_inferences: usize,
    pub duo_inferences: usize,
    pub total: usize,
}

impl CostLedger {
    fn new(h0_candidates: usize, mono_inferences: usize, duo_inferences: usize) -> Self {
        Self {
            h0_candidates,
            mono_inferences,
            duo_inferences,
            total: mono_inferences + duo_inferences,
        }
    }

    pub const CSV_HEADER: &'static str = "query_id,h0_candidates,mono_inferences,duo_inferences,total";

    pub fn csv_row(&self, query_id: &str) -> String {
        format!(
            "{query_id},{},{},{},{}",
            self.h0_candidates, self.mono_inferences, self.duo_inferences, self.total
        )
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub r0: RankedList,
    pub r1: RankedList,
    /// Absent when the pairwise stage is disabled (`k1 = 0`).
    pub r2: Option<RankedList>,
    pub ledger: CostLedger,
    /// Pair probabilities computed by H2, if it ran.
    pub pairs: Option<PairMatrix>,
}

impl PipelineResult {
    /// The list handed back to the user: `R_2` if present, else `R_1`.
    pub fn final_list(&self) -> &RankedList {
        self.r2.as_ref().unwrap_or(&self.r1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("stage {stage} failed for query {query_id}: {source}")]
    Stage {
        stage: &'static str,
        query_id: String,
        #[source]
        source: StageError,
    },
}

/// A configured cascade over one collection.
pub struct Pipeline<'a> {
    pub store: &'a DocumentStore,
    pub index: &'a InvertedIndex,
    pub bm25: Bm25Params,
    pub mono: &'a dyn PointwiseScorer,
    pub duo: Option<&'a dyn PairwiseScorer>,
}

impl<'a> Pipeline<'a> {
    pub fn new(store: &'a DocumentStore, index: &'a InvertedIndex, mono: &'a dyn PointwiseScorer) -> Self {
        Self {
            store,
            index,
            bm25: index.params(),
            mono,
            duo: None,
        }
    }

    pub fn with_duo(mut self, duo: &'a dyn PairwiseScorer) -> Self {
        self.duo = Some(duo);
        self
    }

    pub fn with_bm25(mut self, params: Bm25Params) -> Self {
        self.bm25 = params;
        self
    }

    pub fn check(&self, budget: &StageBudget) -> Result<(), PipelineError> {
        budget.validate()?;
        if budget.k1 > 0 && self.duo.is_none() {
            return Err(PipelineError::Config("k1 > 0 requires a pairwise scorer".into()));
        }
        Ok(())
    }

    pub fn run(&self, query: &Query, budget: &StageBudget) -> Result<PipelineResult, PipelineError> {
        self.check(budget)?;
        let stage_err = |stage: &'static str| {
            let query_id = query.query_id.clone();
            move |source: StageError| PipelineError::Stage {
                stage,
                query_id,
                source,
            }
        };

        let r0 = self.index.retrieve_top_k(query, budget.k0, self.bm25);
        let r1 = rerank_mono(self.mono, self.store, query, &r0, budget.mono_keep()).map_err(stage_err(H1_LABEL))?;
        let mono_inferences = r0.len();

        let (r2, pairs, duo_inferences) = match (budget.k1, self.duo) {
            (0, _) | (_, None) => (None, None, 0),
            (_, Some(duo)) => {
                let method = effective_method(&budget.aggregation, r1.len());
                let out = rerank_duo(duo, self.store, query, &r1, &method).map_err(stage_err(H2_LABEL))?;
                (Some(out.list), Some(out.matrix), out.pairs_scored)
            }
        };
        Ok(PipelineResult {
            ledger: CostLedger::new(r0.len(), mono_inferences, duo_inferences),
            r0,
            r1,
            r2,
            pairs,
        })
    }

    /// Runs every query independently; results are in input order.
    pub fn run_all(&self, queries: &[Query], budget: &StageBudget) -> Vec<Result<PipelineResult, PipelineError>> {
        queries.par_iter().map(|q| self.run(q, budget)).collect()
    }
}

/// When `R_1` holds fewer than `m + 1` candidates, Sample draws `m = n - 1`.
fn effective_method(method: &AggregationMethod, n: usize) -> AggregationMethod {
    match *method {
        AggregationMethod::Sample { m, seed } if n >= 2 && m > n - 1 => AggregationMethod::Sample { m: n - 1, seed },
        other => other,
    }
}
