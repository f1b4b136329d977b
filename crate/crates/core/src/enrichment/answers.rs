use std::ops::Range;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{clamp_top_docs, EnrichmentConfig};
use crate::corpus::{DocLookup, Document};
use crate::embedding::{cosine_similarity, Embedder};
use crate::error::{Error, Result};
use crate::guided::{ConversationTurn, RankedList};
use crate::http::{join_url, JsonClient, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub text: String,
    pub source_doc: String,
    pub score: f64,
}

/// Which answer extractor a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExtractorSpec {
    /// Pick the document sentence closest to the baseline query, using the
    /// `answer` stage embedder.
    #[default]
    Sentence,
    /// Delegate to an extractive QA service: `POST {endpoint}/extract`.
    Http {
        endpoint: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
}

fn default_timeout_secs() -> u64 {
    60
}
fn default_retries() -> u32 {
    3
}

#[derive(Serialize)]
struct ExtractRequest<'a> {
    question: &'a str,
    context: &'a str,
}

#[derive(Deserialize)]
struct ExtractResponse {
    answer: String,
    score: f64,
}

/// A built extractor, ready to run.
pub struct AnswerExtractor(Extractor);

enum Extractor {
    Sentence(Arc<dyn Embedder>),
    Http { url: String, client: JsonClient },
}

impl AnswerExtractor {
    pub fn new(spec: &ExtractorSpec, answer_embedder: Arc<dyn Embedder>) -> Self {
        AnswerExtractor(match spec {
            ExtractorSpec::Sentence => Extractor::Sentence(answer_embedder),
            ExtractorSpec::Http {
                endpoint,
                timeout_secs,
                max_retries,
            } => Extractor::Http {
                url: join_url(endpoint, "extract"),
                client: JsonClient::new(
                    Duration::from_secs(*timeout_secs),
                    None,
                    RetryPolicy {
                        max_retries: *max_retries,
                        backoff: Duration::from_millis(200),
                    },
                ),
            },
        })
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

/// Byte ranges of the sentences of `text`, trimmed. A sentence ends at a run
/// of `.`, `?` or `!` followed by whitespace or the end of the text, so
/// decimals like `3.5` do not split. Text without any boundary is one
/// sentence.
pub fn split_sentences(text: &str) -> Vec<Range<usize>> {
    let mut raw = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if !is_terminator(c) {
            continue;
        }
        while let Some(&(_, next)) = chars.peek() {
            if is_terminator(next) {
                chars.next();
            } else {
                break;
            }
        }
        match chars.peek() {
            Some(&(i, next)) if next.is_whitespace() => {
                raw.push(start..i);
                start = i;
            }
            None => {
                raw.push(start..text.len());
                start = text.len();
            }
            _ => {}
        }
    }
    if start < text.len() {
        raw.push(start..text.len());
    }
    let mut sentences: Vec<Range<usize>> = raw
        .into_iter()
        .map(|r| trim_range(text, r))
        .filter(|r| text[r.clone()].chars().any(char::is_alphanumeric))
        .collect();
    if sentences.is_empty() {
        let whole = trim_range(text, 0..text.len());
        if !whole.is_empty() {
            sentences.push(whole);
        }
    }
    sentences
}

fn trim_range(text: &str, range: Range<usize>) -> Range<usize> {
    let slice = &text[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim().len();
    range.start + lead..range.start + lead + trimmed
}

/// One expected answer from one document.
pub fn extract_answer(
    turn: &ConversationTurn,
    doc: &Document,
    extractor: &AnswerExtractor,
) -> Result<AnswerSpan> {
    if doc.text.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "document {:?} is empty",
            doc.doc_id
        )));
    }
    match &extractor.0 {
        Extractor::Sentence(embedder) => {
            let ranges = split_sentences(&doc.text);
            let sentences: Vec<&str> = ranges.iter().map(|r| &doc.text[r.clone()]).collect();
            let query = embedder.embed_one(&turn.baseline_query)?;
            let vectors = embedder.embed(&sentences)?;
            let mut best = (0, f64::NEG_INFINITY);
            for (i, v) in vectors.iter().enumerate() {
                let score = cosine_similarity(&query, v)?;
                if score > best.1 {
                    best = (i, score);
                }
            }
            Ok(AnswerSpan {
                text: sentences[best.0].to_string(),
                source_doc: doc.doc_id.clone(),
                score: best.1,
            })
        }
        Extractor::Http { url, client } => {
            let response: ExtractResponse = client.post(
                url,
                &ExtractRequest {
                    question: &turn.baseline_query,
                    context: &doc.text,
                },
            )?;
            Ok(AnswerSpan {
                text: response.answer,
                source_doc: doc.doc_id.clone(),
                score: response.score,
            })
        }
    }
}

/// Expected answers from the top `answer_top_docs` guided documents, in rank
/// order.
pub fn generate_answers(
    guided: &RankedList,
    turn: &ConversationTurn,
    cfg: &EnrichmentConfig,
    docs: &dyn DocLookup,
    extractor: &AnswerExtractor,
) -> Result<Vec<AnswerSpan>> {
    let top = clamp_top_docs(cfg.answer_top_docs, guided.len(), "answer generation");
    guided.entries[..top]
        .iter()
        .map(|entry| extract_answer(turn, docs.require(&entry.doc_id)?, extractor))
        .collect()
}

/// All answers joined by single spaces, in the order given. Blank answers
/// contribute nothing.
pub fn unify_answers(spans: &[AnswerSpan]) -> String {
    spans
        .iter()
        .map(|s| s.text.trim())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}
