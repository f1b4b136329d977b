use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::guided::QueryKey;

/// Highest graded relevance level in the judgments.
pub const MAX_RELEVANCE: u8 = 4;

/// Relevance judgments: qid → doc_id → grade (0..=4).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one judgment. A second judgment for the same pair is an error.
    pub fn insert(
        &mut self,
        qid: impl Into<String>,
        doc_id: impl Into<String>,
        rel: u8,
    ) -> Result<()> {
        if rel > MAX_RELEVANCE {
            return Err(Error::InvalidInput(format!(
                "relevance {rel} outside 0..={MAX_RELEVANCE}"
            )));
        }
        let qid = qid.into();
        let doc_id = doc_id.into();
        let per_query = self.judgments.entry(qid.clone()).or_default();
        if per_query.contains_key(&doc_id) {
            return Err(Error::InvalidInput(format!(
                "duplicate judgment for ({qid}, {doc_id})"
            )));
        }
        per_query.insert(doc_id, rel);
        Ok(())
    }

    pub fn query(&self, qid: &str) -> Option<&BTreeMap<String, u8>> {
        self.judgments.get(qid)
    }

    pub fn for_key(&self, key: &QueryKey) -> Option<&BTreeMap<String, u8>> {
        self.query(&key.qid())
    }

    pub fn rel(&self, qid: &str, doc_id: &str) -> Option<u8> {
        self.judgments.get(qid)?.get(doc_id).copied()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// Total number of judgments.
    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

pub fn parse_qrels(path: &Path) -> Result<Qrels> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qrels_str(&text, path)
}

/// Parse `qid 0 docid rel` lines. Blank lines are ignored.
pub fn parse_qrels_str(text: &str, path: &Path) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _iteration, doc_id, rel] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        let rel: u8 = rel.parse().map_err(|_| {
            err(format!(
                "relevance {rel:?} is not an integer in 0..={MAX_RELEVANCE}"
            ))
        })?;
        qrels
            .insert(qid, doc_id, rel)
            .map_err(|e| err(e.to_string()))?;
    }
    Ok(qrels)
}
