//! On-disk index layout.
//!
//! ```text
//! <dir>/meta.json       format tag, version, BM25 params, tokenizer options
//! <dir>/postings.bin    "CASCPST1", term count, then per term: len-prefixed
//!                       term, posting count, (doc u32, tf u32)*
//! <dir>/lengths.bin     "CASCLEN1", doc count, u32 token count per doc
//! <dir>/ids.bin         "CASCIDS1", doc count, len-prefixed external ids
//! <dir>/documents.*     the document store (texts for the re-rankers)
//! ```
//!
//! All integers are little-endian. Any magic or version mismatch is rejected.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bm25Params, IndexError, InvertedIndex, Posting, Tokenizer, TokenizerConfig};
use crate::corpus::DocumentStore;

pub const INDEX_FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "cascade-index";

const POSTINGS_MAGIC: &[u8; 8] = b"CASCPST1";
const LENGTHS_MAGIC: &[u8; 8] = b"CASCLEN1";
const IDS_MAGIC: &[u8; 8] = b"CASCIDS1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub format: String,
    pub version: u32,
    pub doc_count: usize,
    pub params: Bm25Params,
    pub tokenizer: TokenizerConfig,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Writer<'a> {
    path: &'a Path,
    out: BufWriter<File>,
}

impl<'a> Writer<'a> {
    fn create(path: &'a Path, magic: &[u8; 8]) -> Result<Self, IndexError> {
        let mut out = BufWriter::new(File::create(path).map_err(io(path))?);
        out.write_all(magic).map_err(io(path))?;
        Ok(Self { path, out })
    }

    fn bytes(&mut self, b: &[u8]) -> Result<(), IndexError> {
        self.out.write_all(b).map_err(io(self.path))
    }

    fn u32(&mut self, v: u32) -> Result<(), IndexError> {
        self.bytes(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> Result<(), IndexError> {
        self.bytes(&v.to_le_bytes())
    }

    fn str(&mut self, s: &str) -> Result<(), IndexError> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }

    fn finish(mut self) -> Result<(), IndexError> {
        self.out.flush().map_err(io(self.path))
    }
}

struct Reader<'a> {
    name: &'a str,
    buf: Vec<u8>,
    at: usize,
}

impl<'a> Reader<'a> {
    fn open(dir: &Path, name: &'a str, magic: &[u8; 8]) -> Result<Self, IndexError> {
        let path = dir.join(name);
        let buf = fs::read(&path).map_err(io(&path))?;
        if buf.get(..8) != Some(&magic[..]) {
            return Err(IndexError::Format(format!("{name}: bad magic header (stale or foreign index)")));
        }
        Ok(Self { name, buf, at: 8 })
    }

    fn take(&mut self, n: usize) -> Result<&[u8], IndexError> {
        let slice = self
            .buf
            .get(self.at..self.at + n)
            .ok_or_else(|| IndexError::Format(format!("{}: truncated", self.name)))?;
        self.at += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, IndexError> {
        let len = self.u32()? as usize;
        let name = self.name;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| IndexError::Format(format!("{name}: invalid UTF-8")))
    }

    fn done(&self) -> Result<(), IndexError> {
        if self.at != self.buf.len() {
            return Err(IndexError::Format(format!("{}: trailing bytes", self.name)));
        }
        Ok(())
    }
}

pub fn save_index(dir: &Path, index: &InvertedIndex, store: &DocumentStore) -> Result<(), IndexError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let meta = IndexMeta {
        format: FORMAT_TAG.into(),
        version: INDEX_FORMAT_VERSION,
        doc_count: index.doc_count(),
        params: index.params(),
        tokenizer: index.tokenizer().config().clone(),
    };
    let meta_path = dir.join("meta.json");
    let json = serde_json::to_string_pretty(&meta).map_err(|e| IndexError::Format(e.to_string()))?;
    fs::write(&meta_path, json + "\n").map_err(io(&meta_path))?;

    let path = dir.join("postings.bin");
    let mut w = Writer::create(&path, POSTINGS_MAGIC)?;
    let mut terms: Vec<&String> = index.postings.keys().collect();
    terms.sort();
    w.u64(terms.len() as u64)?;
    for term in terms {
        let list = &index.postings[term];
        w.str(term)?;
        w.u32(list.len() as u32)?;
        for p in list {
            w.u32(p.doc)?;
            w.u32(p.tf)?;
        }
    }
    w.finish()?;

    let path = dir.join("lengths.bin");
    let mut w = Writer::create(&path, LENGTHS_MAGIC)?;
    w.u64(index.doc_lengths.len() as u64)?;
    for &l in &index.doc_lengths {
        w.u32(l)?;
    }
    w.finish()?;

    let path = dir.join("ids.bin");
    let mut w = Writer::create(&path, IDS_MAGIC)?;
    w.u64(index.doc_ids.len() as u64)?;
    for id in &index.doc_ids {
        w.str(id)?;
    }
    w.finish()?;

    store.save(dir)?;
    Ok(())
}

pub fn load_index(dir: &Path) -> Result<(DocumentStore, InvertedIndex), IndexError> {
    let meta_path = dir.join("meta.json");
    let raw = fs::read_to_string(&meta_path).map_err(io(&meta_path))?;
    let meta: IndexMeta = serde_json::from_str(&raw).map_err(|e| IndexError::Format(format!("meta.json: {e}")))?;
    if meta.format != FORMAT_TAG || meta.version != INDEX_FORMAT_VERSION {
        return Err(IndexError::Format(format!(
            "unsupported index format {:?} version {} (expected {FORMAT_TAG:?} version {INDEX_FORMAT_VERSION})",
            meta.format, meta.version
        )));
    }

    let mut r = Reader::open(dir, "postings.bin", POSTINGS_MAGIC)?;
    let n_terms = r.u64()? as usize;
    let mut postings = HashMap::with_capacity(n_terms);
    for _ in 0..n_terms {
        let term = r.string()?;
        let n = r.u32()? as usize;
        let mut list = Vec::with_capacity(n);
        for _ in 0..n {
            list.push(Posting {
                doc: r.u32()?,
                tf: r.u32()?,
            });
        }
        postings.insert(term, list);
    }
    r.done()?;

    let mut r = Reader::open(dir, "lengths.bin", LENGTHS_MAGIC)?;
    let n = r.u64()? as usize;
    let doc_lengths = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    r.done()?;

    let mut r = Reader::open(dir, "ids.bin", IDS_MAGIC)?;
    let n = r.u64()? as usize;
    let doc_ids = (0..n).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
    r.done()?;

    if doc_lengths.len() != meta.doc_count {
        return Err(IndexError::Format("doc count in meta.json does not match lengths.bin".into()));
    }
    let store = DocumentStore::load(dir)?;
    if store.len() != meta.doc_count {
        return Err(IndexError::Format("document store size does not match index".into()));
    }
    let index = InvertedIndex::from_parts(postings, doc_lengths, doc_ids, Tokenizer::new(meta.tokenizer), meta.params)?;
    Ok((store, index))
}
