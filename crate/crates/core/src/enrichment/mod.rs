//! Retriever-friendly signals mined from the final guided documents:
//! keywords per document and one expected answer per document, the answers
//! merged into a single unified answer.

mod answers;
mod keywords;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use answers::{
    extract_answer, generate_answers, split_sentences, unify_answers, AnswerExtractor, AnswerSpan,
    ExtractorSpec,
};
pub use keywords::{augment_keywords, candidate_ngrams, extract_keywords, KeywordCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrichmentConfig {
    /// How many top guided documents contribute keywords.
    pub keyword_top_docs: usize,
    /// Keywords kept per document.
    pub keyword_span: usize,
    /// Candidate n-gram widths, inclusive.
    #[serde(default = "default_ngram_range")]
    pub ngram_range: (usize, usize),
    /// How many top guided documents contribute an expected answer.
    pub answer_top_docs: usize,
}

fn default_ngram_range() -> (usize, usize) {
    (1, 1)
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        Self {
            keyword_top_docs: 4,
            keyword_span: 15,
            ngram_range: default_ngram_range(),
            answer_top_docs: 6,
        }
    }
}

impl EnrichmentConfig {
    pub fn validate(&self) -> Result<()> {
        validate_ngram_range(self.ngram_range)?;
        if self.keyword_span == 0 {
            return Err(Error::Config("keyword_span must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn validate_ngram_range((low, high): (usize, usize)) -> Result<()> {
    if low < 1 || low > high || high > 3 {
        return Err(Error::InvalidInput(format!(
            "ngram_range ({low}, {high}) must satisfy 1 <= low <= high <= 3"
        )));
    }
    Ok(())
}

/// Clamp a per-turn document budget to what the guided list holds.
pub(crate) fn clamp_top_docs(requested: usize, available: usize, what: &str) -> usize {
    if requested > available {
        tracing::warn!(
            "{what}: requested {requested} documents, only {available} guided documents available"
        );
        available
    } else {
        requested
    }
}
