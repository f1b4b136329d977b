//! Passage corpus ingestion, the inverted index and BM25 retrieval.

mod bm25;
mod index;
mod tokenize;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bm25::{bm25_retrieve, Bm25Params};
pub use index::{CorpusIndex, Posting, INDEX_MAGIC};
pub use tokenize::{token_spans, tokenize, truncate_tokens};

/// One corpus passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
        }
    }
}

/// Anything that can resolve a doc_id to its passage.
pub trait DocLookup {
    fn document(&self, doc_id: &str) -> Option<&Document>;

    fn require(&self, doc_id: &str) -> Result<&Document> {
        self.document(doc_id)
            .ok_or_else(|| Error::MissingDocument(doc_id.to_string()))
    }
}

impl DocLookup for std::collections::HashMap<String, Document> {
    fn document(&self, doc_id: &str) -> Option<&Document> {
        self.get(doc_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Guess from the file extension; anything that is not `.tsv` is jsonl.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct JsonlDoc {
    doc_id: String,
    text: String,
}

/// Read a corpus file. Documents come back in file order; blank lines are
/// skipped.
pub fn ingest_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), format, path)
}

pub fn parse_corpus(
    reader: impl BufRead,
    format: CorpusFormat,
    path: &Path,
) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let doc = match format {
            CorpusFormat::Jsonl => {
                let raw: JsonlDoc = serde_json::from_str(&line)
                    .map_err(|e| malformed(format!("bad corpus record: {e}")))?;
                Document::new(raw.doc_id, raw.text)
            }
            CorpusFormat::Tsv => {
                let (id, text) = line
                    .split_once('\t')
                    .ok_or_else(|| malformed("expected doc_id<TAB>text".into()))?;
                Document::new(id, text)
            }
        };
        if doc.doc_id.is_empty() {
            return Err(malformed("empty doc_id".into()));
        }
        if doc.text.trim().is_empty() {
            return Err(malformed(format!(
                "document {:?} has empty text",
                doc.doc_id
            )));
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateDocId {
                id: doc.doc_id,
                line: line_no,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}
