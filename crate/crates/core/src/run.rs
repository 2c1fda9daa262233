//! TREC run files: `qid Q0 docid rank score tag`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::ranking::RankedList;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

/// Ranked results grouped per query, in first-seen query order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    pub tag: String,
    queries: Vec<(String, Vec<RunRow>)>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("line {line}: expected `qid Q0 docid rank score tag`")]
    Malformed { line: usize },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunFile {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            queries: Vec::new(),
        }
    }

    /// Builds a run from final per-query lists; ranks start at 1.
    pub fn from_lists<'a>(tag: &str, lists: impl IntoIterator<Item = &'a RankedList>) -> Self {
        let mut run = Self::new(tag);
        for list in lists {
            run.push_list(list);
        }
        run
    }

    pub fn push_list(&mut self, list: &RankedList) {
        let rows = list
            .entries
            .iter()
            .enumerate()
            .map(|(i, c)| RunRow {
                doc_id: c.doc_id.clone(),
                rank: i + 1,
                score: c.score,
            })
            .collect();
        self.queries.push((list.query_id.clone(), rows));
    }

    /// Adds an empty ranking, so the query still counts as evaluated.
    pub fn push_empty(&mut self, query_id: &str) {
        self.queries.push((query_id.to_string(), Vec::new()));
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &[RunRow])> {
        self.queries.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn rows_for(&self, query_id: &str) -> Option<&[RunRow]> {
        self.queries
            .iter()
            .find(|(q, _)| q == query_id)
            .map(|(_, r)| r.as_slice())
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    /// Serializes with scores at six decimals, one row per line.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (qid, rows) in &self.queries {
            for r in rows {
                writeln!(out, "{qid} Q0 {} {} {:.6} {}", r.doc_id, r.rank, r.score, self.tag).unwrap();
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        std::fs::write(path, self.to_trec_string()).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, RunError> {
        let content = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&content)
    }

    /// Parses and validates a run: per query, ranks must run 1, 2, 3, ... in
    /// file order, scores must not increase, and doc ids must be distinct.
    pub fn parse(content: &str) -> Result<Self, RunError> {
        let mut run = RunFile::default();
        let mut slot: HashMap<String, usize> = HashMap::new();
        let mut seen: Vec<HashSet<String>> = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(RunError::Malformed { line: line_no });
            }
            let invalid = |msg: String| RunError::Invalid { line: line_no, msg };
            let rank: usize = f[3].parse().map_err(|_| invalid(format!("bad rank {:?}", f[3])))?;
            let score: f64 = f[4].parse().map_err(|_| invalid(format!("bad score {:?}", f[4])))?;
            if !score.is_finite() {
                return Err(invalid(format!("non-finite score {:?}", f[4])));
            }
            if run.tag.is_empty() {
                run.tag = f[5].to_string();
            }
            let k = *slot.entry(f[0].to_string()).or_insert_with(|| {
                run.queries.push((f[0].to_string(), Vec::new()));
                seen.push(HashSet::new());
                run.queries.len() - 1
            });
            let rows = &mut run.queries[k].1;
            if rank != rows.len() + 1 {
                return Err(invalid(format!(
                    "query {}: expected rank {}, found {rank}",
                    f[0],
                    rows.len() + 1
                )));
            }
            if let Some(prev) = rows.last() {
                if score > prev.score {
                    return Err(invalid(format!("query {}: score increases at rank {rank}", f[0])));
                }
            }
            if !seen[k].insert(f[2].to_string()) {
                return Err(invalid(format!("query {}: duplicate document {}", f[0], f[2])));
            }
            rows.push(RunRow {
                doc_id: f[2].to_string(),
                rank,
                score,
            });
        }
        Ok(run)
    }
}
