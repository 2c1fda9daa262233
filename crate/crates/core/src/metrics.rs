//! MRR@10, MAP and Recall@k.
//!
//! A query is evaluated when the qrels list at least one relevant document
//! for it. Evaluated queries missing from the run score 0; run queries that
//! are absent from the qrels (or have no relevant documents) are skipped and
//! listed in [`MetricReport::skipped`].

use std::collections::{BTreeMap, HashSet};

use crate::corpus::Qrels;
use crate::run::{RunFile, RunRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mrr10,
    Map,
    Recall(usize),
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Mrr10 => f.write_str("mrr10"),
            Metric::Map => f.write_str("map"),
            Metric::Recall(k) => write!(f, "recall@{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricScores {
    pub mean: f64,
    pub per_query: BTreeMap<String, f64>,
    /// Run queries left out of the mean.
    pub skipped: Vec<String>,
}

/// Every metric over one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mrr_at_10: f64,
    pub map: f64,
    pub recall: BTreeMap<usize, f64>,
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub reciprocal_rank: f64,
    pub average_precision: f64,
    pub recall: BTreeMap<usize, f64>,
}

fn evaluate_with(run: &RunFile, qrels: &Qrels, per_query: impl Fn(&[RunRow], &HashSet<&str>) -> f64) -> MetricScores {
    let skipped: Vec<String> = run
        .queries()
        .map(|(q, _)| q)
        .filter(|q| qrels.num_relevant(q) == 0)
        .map(str::to_string)
        .collect();
    let mut scores = BTreeMap::new();
    for qid in qrels.query_ids() {
        let relevant: HashSet<&str> = qrels.relevant_docs(qid).collect();
        if relevant.is_empty() {
            continue;
        }
        let rows = run.rows_for(qid).unwrap_or(&[]);
        scores.insert(qid.to_string(), per_query(rows, &relevant));
    }
    let mean = if scores.is_empty() {
        0.0
    } else {
        scores.values().sum::<f64>() / scores.len() as f64
    };
    MetricScores {
        mean,
        per_query: scores,
        skipped,
    }
}

fn reciprocal_rank_at(rows: &[RunRow], relevant: &HashSet<&str>, cutoff: usize) -> f64 {
    rows.iter()
        .take(cutoff)
        .position(|r| relevant.contains(r.doc_id.as_str()))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

fn average_precision(rows: &[RunRow], relevant: &HashSet<&str>) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, r) in rows.iter().enumerate() {
        if relevant.contains(r.doc_id.as_str()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

fn recall(rows: &[RunRow], relevant: &HashSet<&str>, k: usize) -> f64 {
    let found = rows
        .iter()
        .take(k)
        .filter(|r| relevant.contains(r.doc_id.as_str()))
        .count();
    found as f64 / relevant.len() as f64
}

/// Per query: `1/r` for the first relevant document at rank `r ≤ 10`, else 0.
pub fn mrr_at_10(run: &RunFile, qrels: &Qrels) -> MetricScores {
    evaluate_with(run, qrels, |rows, rel| reciprocal_rank_at(rows, rel, 10))
}

pub fn mean_average_precision(run: &RunFile, qrels: &Qrels) -> MetricScores {
    evaluate_with(run, qrels, average_precision)
}

pub fn recall_at_k(run: &RunFile, qrels: &Qrels, k: usize) -> MetricScores {
    evaluate_with(run, qrels, |rows, rel| recall(rows, rel, k))
}

pub fn compute(metric: Metric, run: &RunFile, qrels: &Qrels) -> MetricScores {
    match metric {
        Metric::Mrr10 => mrr_at_10(run, qrels),
        Metric::Map => mean_average_precision(run, qrels),
        Metric::Recall(k) => recall_at_k(run, qrels, k),
    }
}

pub fn report(run: &RunFile, qrels: &Qrels, recall_ks: &[usize]) -> MetricReport {
    let mrr = mrr_at_10(run, qrels);
    let map = mean_average_precision(run, qrels);
    let recalls: Vec<(usize, MetricScores)> = recall_ks.iter().map(|&k| (k, recall_at_k(run, qrels, k))).collect();
    let per_query = mrr
        .per_query
        .iter()
        .map(|(qid, &rr)| {
            (
                qid.clone(),
                QueryMetrics {
                    reciprocal_rank: rr,
                    average_precision: map.per_query[qid],
                    recall: recalls.iter().map(|(k, s)| (*k, s.per_query[qid])).collect(),
                },
            )
        })
        .collect();
    MetricReport {
        mrr_at_10: mrr.mean,
        map: map.mean,
        recall: recalls.iter().map(|(k, s)| (*k, s.mean)).collect(),
        per_query,
        skipped: mrr.skipped,
    }
}
