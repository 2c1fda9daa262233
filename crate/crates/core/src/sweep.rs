//! Cost/quality sweeps over `(k0, k1, method, m)` grids.
//!
//! Each grid cell runs the full query set through the cascade and records the
//! mean number of scorer inferences per query next to the chosen metric.
//! Which inferences are counted is selected by [`CostAxis`]: `total`
//! (`k0 + k1(k1 − 1)` with full aggregation), `mono` (`k0`), or `duo`
//! (`k1(k1 − 1)`). Sample cells count the pairs actually scored, `k1 · m`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentStore, Qrels, Query};
use crate::duo::AggregationMethod;
use crate::index::{Bm25Params, InvertedIndex};
use crate::metrics::{compute, Metric};
use crate::pipeline::{CostLedger, Pipeline, PipelineError, StageBudget};
use crate::run::RunFile;
use crate::scorer::{PairwiseScorer, PointwiseScorer};
use crate::seed::derive_seed;

pub const CSV_HEADER: &str = "k0,k1,method,m,trials,inferences_per_query,metric";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CostAxis {
    #[default]
    Total,
    Mono,
    Duo,
}

impl CostAxis {
    pub fn of(&self, ledger: &CostLedger) -> usize {
        match self {
            CostAxis::Total => ledger.total,
            CostAxis::Mono => ledger.mono_inferences,
            CostAxis::Duo => ledger.duo_inferences,
        }
    }
}

impl FromStr for CostAxis {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "total" => Ok(CostAxis::Total),
            "mono" => Ok(CostAxis::Mono),
            "duo" => Ok(CostAxis::Duo),
            other => Err(SweepError::Config(format!("unknown cost axis {other:?} (total|mono|duo)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub k0: Vec<usize>,
    pub k1: Vec<usize>,
    /// Method kinds; a Sample entry is expanded over `m`.
    pub methods: Vec<AggregationMethod>,
    pub m: Vec<usize>,
    /// Trials averaged per Sample cell.
    pub trials: usize,
    pub seed: u64,
    pub metric: Metric,
    pub cost: CostAxis,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            k0: vec![1000],
            k1: vec![0, 10, 20, 30, 40, 50],
            methods: vec![AggregationMethod::Sum],
            m: Vec::new(),
            trials: 10,
            seed: 0,
            metric: Metric::Mrr10,
            cost: CostAxis::Total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k0: usize,
    pub k1: usize,
    pub method: String,
    pub m: Option<usize>,
    pub trials: usize,
    /// Mean over queries (and trials) of the selected cost component.
    pub inferences_per_query: f64,
    pub metric_value: f64,
    pub mono_per_query: f64,
    pub duo_per_query: f64,
    pub total_per_query: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    /// Human-readable notes on grid cells that were not run.
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Everything a sweep cell needs to run the cascade.
pub struct SweepContext<'a> {
    pub store: &'a DocumentStore,
    pub index: &'a InvertedIndex,
    pub bm25: Bm25Params,
    pub queries: &'a [Query],
    pub qrels: &'a Qrels,
    pub mono: &'a dyn PointwiseScorer,
    pub duo: Option<&'a dyn PairwiseScorer>,
}

struct Cell {
    k0: usize,
    k1: usize,
    method: AggregationMethod,
}

fn expand(grid: &SweepGrid) -> Result<(Vec<Cell>, Vec<String>), SweepError> {
    if grid.k0.is_empty() || grid.k1.is_empty() || grid.methods.is_empty() {
        return Err(SweepError::Config("k0, k1 and methods must be non-empty".into()));
    }
    if grid.trials == 0 {
        return Err(SweepError::Config("trials must be at least 1".into()));
    }
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    for &k0 in &grid.k0 {
        for &k1 in &grid.k1 {
            for method in &grid.methods {
                let variants: Vec<AggregationMethod> = match method {
                    AggregationMethod::Sample { .. } => {
                        if grid.m.is_empty() {
                            return Err(SweepError::Config("sample requires a non-empty m list".into()));
                        }
                        grid.m
                            .iter()
                            .map(|&m| AggregationMethod::Sample { m, seed: grid.seed })
                            .collect()
                    }
                    other => vec![*other],
                };
                for method in variants {
                    if k1 > k0 {
                        warnings.push(format!("skipping k0={k0} k1={k1} method={method}: k1 exceeds k0"));
                        continue;
                    }
                    if k0 == 0 || method.sample_m() == Some(0) {
                        warnings.push(format!("skipping k0={k0} k1={k1} method={method}: zero-sized cell"));
                        continue;
                    }
                    cells.push(Cell { k0, k1, method });
                }
            }
        }
    }
    Ok((cells, warnings))
}

pub fn sweep(ctx: &SweepContext<'_>, grid: &SweepGrid) -> Result<SweepOutcome, SweepError> {
    let (cells, warnings) = expand(grid)?;
    if ctx.duo.is_none() && cells.iter().any(|c| c.k1 > 0) {
        return Err(SweepError::Config("grid has k1 > 0 but no pairwise scorer was given".into()));
    }
    let mut pipeline = Pipeline::new(ctx.store, ctx.index, ctx.mono).with_bm25(ctx.bm25);
    if let Some(duo) = ctx.duo {
        pipeline = pipeline.with_duo(duo);
    }
    let mut points = Vec::with_capacity(cells.len());
    for cell in cells {
        let sampled = matches!(cell.method, AggregationMethod::Sample { .. }) && cell.k1 > 0;
        let trials = if sampled { grid.trials } else { 1 };
        let (mut metric_sum, mut cost, mut mono, mut duo, mut total, mut n) = (0.0, 0usize, 0usize, 0usize, 0usize, 0usize);
        for trial in 0..trials {
            let method = match cell.method {
                AggregationMethod::Sample { m, seed } if sampled => AggregationMethod::Sample {
                    m,
                    seed: derive_seed(seed, &[b"trial", &(trial as u64).to_le_bytes()]),
                },
                other => other,
            };
            let budget = StageBudget::new(cell.k0, cell.k1, method)?;
            let results = pipeline.run_all(ctx.queries, &budget);
            let mut run = RunFile::new("sweep");
            for (q, res) in ctx.queries.iter().zip(results) {
                let res = res?;
                cost += grid.cost.of(&res.ledger);
                mono += res.ledger.mono_inferences;
                duo += res.ledger.duo_inferences;
                total += res.ledger.total;
                n += 1;
                if res.final_list().is_empty() {
                    run.push_empty(&q.query_id);
                } else {
                    run.push_list(res.final_list());
                }
            }
            metric_sum += compute(grid.metric, &run, ctx.qrels).mean;
        }
        let per = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        points.push(SweepPoint {
            k0: cell.k0,
            k1: cell.k1,
            method: cell.method.name().to_string(),
            m: cell.method.sample_m(),
            trials,
            inferences_per_query: per(cost),
            metric_value: metric_sum / trials as f64,
            mono_per_query: per(mono),
            duo_per_query: per(duo),
            total_per_query: per(total),
        });
    }
    Ok(SweepOutcome { points, warnings })
}

pub fn to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6}",
            p.k0,
            p.k1,
            p.method,
            p.m.map(|m| m.to_string()).unwrap_or_default(),
            p.trials,
            p.inferences_per_query,
            p.metric_value
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::index::Tokenizer;
    use crate::scorer::{ConstantScorer, QrelsOracle};

    fn setup(n_docs: usize) -> (DocumentStore, InvertedIndex, Vec<Query>, Qrels) {
        let store = DocumentStore::from_documents(
            (0..n_docs).map(|i| Document::new(format!("d{i}"), format!("shared t{} {}", i % 5, "pad ".repeat(i % 9)))),
        )
        .unwrap();
        let index = InvertedIndex::build(&store, Tokenizer::default(), Bm25Params::default()).unwrap();
        let queries: Vec<Query> = (0..4).map(|q| Query::new(format!("q{q}"), format!("shared t{q}"))).collect();
        let mut qrels = Qrels::new();
        for q in 0..4 {
            qrels.insert(&format!("q{q}"), &format!("d{}", q * 7 + 3), 1);
        }
        (store, index, queries, qrels)
    }

    #[test]
    fn pairwise_cost_axis_matches_k1_squared() {
        let (store, index, queries, qrels) = setup(120);
        let oracle = QrelsOracle::new(qrels.clone());
        let ctx = SweepContext {
            store: &store,
            index: &index,
            bm25: Bm25Params::default(),
            queries: &queries,
            qrels: &qrels,
            mono: &oracle,
            duo: Some(&oracle),
        };
        let grid = SweepGrid {
            k0: vec![100],
            k1: vec![0, 5, 10],
            cost: CostAxis::Duo,
            ..SweepGrid::default()
        };
        let out = sweep(&ctx, &grid).unwrap();
        let xs: Vec<f64> = out.points.iter().map(|p| p.inferences_per_query).collect();
        assert_eq!(xs, vec![0.0, 20.0, 90.0]);
        assert!(out.points.iter().all(|p| p.total_per_query == 100.0 + p.duo_per_query));
    }

    #[test]
    fn infeasible_cells_are_skipped() {
        let (store, index, queries, qrels) = setup(30);
        let c = ConstantScorer(0.5);
        let ctx = SweepContext {
            store: &store,
            index: &index,
            bm25: Bm25Params::default(),
            queries: &queries,
            qrels: &qrels,
            mono: &c,
            duo: Some(&c),
        };
        let grid = SweepGrid {
            k0: vec![5],
            k1: vec![3, 8],
            ..SweepGrid::default()
        };
        let out = sweep(&ctx, &grid).unwrap();
        assert_eq!(out.points.len(), 1);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("k1=8"));
    }

    #[test]
    fn sample_cells_average_trials() {
        let (store, index, queries, qrels) = setup(60);
        let c = ConstantScorer(0.5);
        let ctx = SweepContext {
            store: &store,
            index: &index,
            bm25: Bm25Params::default(),
            queries: &queries,
            qrels: &qrels,
            mono: &c,
            duo: Some(&c),
        };
        let grid = SweepGrid {
            k0: vec![20],
            k1: vec![10],
            methods: vec![AggregationMethod::Sample { m: 1, seed: 0 }],
            m: vec![3],
            trials: 4,
            cost: CostAxis::Duo,
            ..SweepGrid::default()
        };
        let out = sweep(&ctx, &grid).unwrap();
        assert_eq!(out.points[0].trials, 4);
        assert_eq!(out.points[0].inferences_per_query, 30.0);
        assert_eq!(out.points[0].m, Some(3));
        let csv = to_csv(&out.points);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert!(csv.lines().nth(1).unwrap().starts_with("20,10,sample,3,4,30,"));
    }

    #[test]
    fn missing_duo_scorer_is_a_config_error() {
        let (store, index, queries, qrels) = setup(10);
        let c = ConstantScorer(0.5);
        let ctx = SweepContext {
            store: &store,
            index: &index,
            bm25: Bm25Params::default(),
            queries: &queries,
            qrels: &qrels,
            mono: &c,
            duo: None,
        };
        assert!(matches!(sweep(&ctx, &SweepGrid::default()), Err(SweepError::Config(_))));
    }
}
