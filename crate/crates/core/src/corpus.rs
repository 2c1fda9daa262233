//! Documents, queries and relevance judgments.
//!
//! Collections and query sets are read from `id<TAB>text` files; judgments
//! come in the TREC qrels layout `qid 0 docid grade`. Text is kept verbatim,
//! normalization is left to the tokenizer.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// A retrievable unit of text (a passage, in practice).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

/// An information need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
}

impl Query {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            text: text.into(),
        }
    }
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected {expected} tab-separated fields, found {found}")]
    MalformedLine {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: empty identifier")]
    EmptyId { line: usize },
    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),
    #[error("duplicate query id {0:?}")]
    DuplicateQuery(String),
    #[error("line {line}: duplicate judgment for ({query_id}, {doc_id})")]
    DuplicateJudgment {
        line: usize,
        query_id: String,
        doc_id: String,
    },
    #[error("line {line}: invalid relevance grade {value:?}")]
    InvalidGrade { line: usize, value: String },
    #[error("line {line}: expected `qid 0 docid grade`")]
    MalformedQrels { line: usize },
    #[error("document {0:?} not found")]
    NotFound(String),
    #[error("{path}: not a document store (bad magic or unsupported version)")]
    BadStore { path: PathBuf },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Immutable, id-addressable document collection.
///
/// Documents keep their ingest order, which doubles as the internal id used
/// by the inverted index.
#[derive(Debug, Clone, Default)]
pub struct DocumentStore {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl DocumentStore {
    pub fn from_documents(docs: impl IntoIterator<Item = Document>) -> Result<Self, CorpusError> {
        let mut store = DocumentStore::default();
        for doc in docs {
            store.push(doc)?;
        }
        Ok(store)
    }

    fn push(&mut self, doc: Document) -> Result<(), CorpusError> {
        if self.by_id.contains_key(&doc.doc_id) {
            return Err(CorpusError::DuplicateDocument(doc.doc_id));
        }
        self.by_id.insert(doc.doc_id.clone(), self.docs.len());
        self.docs.push(doc);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Result<&Document, CorpusError> {
        self.by_id
            .get(doc_id)
            .map(|&i| &self.docs[i])
            .ok_or_else(|| CorpusError::NotFound(doc_id.to_string()))
    }

    /// Position of a document in ingest order.
    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).copied()
    }

    pub fn by_position(&self, pos: usize) -> Option<&Document> {
        self.docs.get(pos)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Document> {
        self.docs.iter()
    }

    const MAGIC: &'static [u8; 8] = b"CASCDOC1";

    /// Writes `documents.bin` and `documents.off` into `dir`.
    ///
    /// `documents.bin` is the magic header followed by length-prefixed
    /// `(doc_id, text)` records; `documents.off` holds one little-endian u64
    /// byte offset per record.
    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let data_path = dir.join("documents.bin");
        let off_path = dir.join("documents.off");
        let mut data = BufWriter::new(File::create(&data_path).map_err(io_err(&data_path))?);
        let mut offs = BufWriter::new(File::create(&off_path).map_err(io_err(&off_path))?);
        let mut pos = Self::MAGIC.len() as u64 + 8;
        data.write_all(Self::MAGIC).map_err(io_err(&data_path))?;
        data.write_all(&(self.docs.len() as u64).to_le_bytes())
            .map_err(io_err(&data_path))?;
        offs.write_all(Self::MAGIC).map_err(io_err(&off_path))?;
        for doc in &self.docs {
            offs.write_all(&pos.to_le_bytes()).map_err(io_err(&off_path))?;
            for field in [doc.doc_id.as_bytes(), doc.text.as_bytes()] {
                data.write_all(&(field.len() as u32).to_le_bytes())
                    .map_err(io_err(&data_path))?;
                data.write_all(field).map_err(io_err(&data_path))?;
                pos += 4 + field.len() as u64;
            }
        }
        data.flush().map_err(io_err(&data_path))?;
        offs.flush().map_err(io_err(&off_path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let data_path = dir.join("documents.bin");
        let off_path = dir.join("documents.off");
        let bytes = fs::read(&data_path).map_err(io_err(&data_path))?;
        let offsets = fs::read(&off_path).map_err(io_err(&off_path))?;
        let bad = || CorpusError::BadStore {
            path: data_path.clone(),
        };
        if bytes.len() < 16 || &bytes[..8] != Self::MAGIC || offsets.get(..8) != Some(&Self::MAGIC[..]) {
            return Err(bad());
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let offsets = &offsets[8..];
        if offsets.len() != count * 8 {
            return Err(bad());
        }
        let mut store = DocumentStore::default();
        store.docs.reserve(count);
        for chunk in offsets.chunks_exact(8) {
            let mut at = u64::from_le_bytes(chunk.try_into().unwrap()) as usize;
            let mut field = || -> Result<String, CorpusError> {
                let len_bytes = bytes.get(at..at + 4).ok_or_else(bad)?;
                let len = u32::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
                let raw = bytes.get(at + 4..at + 4 + len).ok_or_else(bad)?;
                at += 4 + len;
                String::from_utf8(raw.to_vec()).map_err(|_| bad())
            };
            let doc_id = field()?;
            let text = field()?;
            store.push(Document { doc_id, text })?;
        }
        Ok(store)
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut content = String::new();
    reader.read_to_string(&mut content).map_err(io_err(path))?;
    Ok(content
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect())
}

/// Splits `id<TAB>text` rows; a trailing empty line (final newline) is skipped.
fn parse_tsv_pairs(lines: &[String]) -> Result<Vec<(String, String)>, CorpusError> {
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.is_empty() && i + 1 == lines.len() {
            break;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(CorpusError::MalformedLine {
                line: i + 1,
                expected: 2,
                found: fields.len(),
            });
        }
        if fields[0].is_empty() {
            return Err(CorpusError::EmptyId { line: i + 1 });
        }
        out.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(out)
}

pub fn ingest_collection(path: &Path) -> Result<DocumentStore, CorpusError> {
    let rows = parse_tsv_pairs(&read_lines(path)?)?;
    DocumentStore::from_documents(rows.into_iter().map(|(doc_id, text)| Document { doc_id, text }))
}

/// Reads a query set, preserving file order.
pub fn ingest_queries(path: &Path) -> Result<Vec<Query>, CorpusError> {
    let rows = parse_tsv_pairs(&read_lines(path)?)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (query_id, text) in rows {
        if !seen.insert(query_id.clone()) {
            return Err(CorpusError::DuplicateQuery(query_id));
        }
        out.push(Query { query_id, text });
    }
    Ok(out)
}

/// Graded relevance judgments. A document is relevant when its grade is at least 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a judgment; returns `false` (and leaves the table untouched) if
    /// the pair was already judged.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> bool {
        let row = self.judgments.entry(query_id.to_string()).or_default();
        if row.contains_key(doc_id) {
            return false;
        }
        row.insert(doc_id.to_string(), grade);
        true
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(query_id)?.get(doc_id).copied()
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id).is_some_and(|g| g >= 1)
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.judgments.contains_key(query_id)
    }

    pub fn relevant_docs<'a>(&'a self, query_id: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.judgments
            .get(query_id)
            .into_iter()
            .flat_map(|row| row.iter().filter(|(_, &g)| g >= 1).map(|(d, _)| d.as_str()))
    }

    pub fn num_relevant(&self, query_id: &str) -> usize {
        self.relevant_docs(query_id).count()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn judgments(&self, query_id: &str) -> impl Iterator<Item = (&str, u32)> {
        self.judgments
            .get(query_id)
            .into_iter()
            .flat_map(|row| row.iter().map(|(d, &g)| (d.as_str(), g)))
    }
}

pub fn parse_qrels(content: &str) -> Result<Qrels, CorpusError> {
    let mut qrels = Qrels::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(CorpusError::MalformedQrels { line: line_no });
        }
        let grade: i64 = fields[3].parse().map_err(|_| CorpusError::InvalidGrade {
            line: line_no,
            value: fields[3].to_string(),
        })?;
        // Negative grades (e.g. -1 for "junk") are not valid here.
        let grade = u32::try_from(grade).map_err(|_| CorpusError::InvalidGrade {
            line: line_no,
            value: fields[3].to_string(),
        })?;
        if !qrels.insert(fields[0], fields[2], grade) {
            return Err(CorpusError::DuplicateJudgment {
                line: line_no,
                query_id: fields[0].to_string(),
                doc_id: fields[2].to_string(),
            });
        }
    }
    Ok(qrels)
}

pub fn ingest_qrels(path: &Path) -> Result<Qrels, CorpusError> {
    let content = fs::read_to_string(path).map_err(io_err(path))?;
    parse_qrels(&content)
}

/// Reads any line-oriented file, e.g. a stopword list.
pub fn read_word_list(path: &Path) -> Result<Vec<String>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(io_err(path)))
        .filter_map(|l| match l {
            Ok(s) if s.trim().is_empty() => None,
            Ok(s) => Some(Ok(s.trim().to_string())),
            Err(e) => Some(Err(e)),
        })
        .collect()
}
