//! Keyword precision: the share of unique augmented keywords found in the
//! query's most relevant (grade 4) documents.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::Qrels;
use crate::corpus::{tokenize, DocLookup};
use crate::enrichment::KeywordCandidate;

/// Grade that marks a document as most relevant.
pub const TOP_RELEVANCE: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordPrecision {
    /// Unique keywords whose tokens all occur in the grade-4 documents.
    pub matched: usize,
    /// Unique (case-folded) keywords.
    pub total: usize,
}

impl KeywordPrecision {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }
}

impl AsRef<str> for KeywordCandidate {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

/// A keyword matches when each of its tokens is a token of at least one
/// grade-4 document of `qid`. Judged documents missing from `docs` are
/// skipped.
pub fn keyword_precision<S: AsRef<str>>(
    keywords: &[S],
    qrels: &Qrels,
    qid: &str,
    docs: &dyn DocLookup,
) -> KeywordPrecision {
    let unique: BTreeSet<String> = keywords
        .iter()
        .map(|k| k.as_ref().trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .collect();

    let mut vocabulary = HashSet::new();
    if let Some(judged) = qrels.query(qid) {
        for (doc_id, _) in judged.iter().filter(|(_, &rel)| rel == TOP_RELEVANCE) {
            match docs.document(doc_id) {
                Some(doc) => vocabulary.extend(tokenize(&doc.text)),
                None => tracing::warn!(%qid, %doc_id, "judged document not in corpus; skipped"),
            }
        }
    }

    let matched = unique
        .iter()
        .filter(|k| {
            let tokens = tokenize(k);
            !tokens.is_empty() && tokens.iter().all(|t| vocabulary.contains(t))
        })
        .count();
    KeywordPrecision {
        matched,
        total: unique.len(),
    }
}
