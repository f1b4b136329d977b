use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{clamp_top_docs, split_sentences, validate_ngram_range, EnrichmentConfig};
use crate::corpus::{tokenize, DocLookup, Document};
use crate::embedding::{cosine_similarity, Embedder, EmbeddingVector};
use crate::error::Result;
use crate::guided::{ConversationTurn, RankedList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordCandidate {
    pub text: String,
    pub source_doc: String,
    pub score: f64,
}

/// Unique lowercase n-grams of `text`, first-occurrence order. N-grams never
/// span a sentence boundary.
pub fn candidate_ngrams(text: &str, (low, high): (usize, usize)) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for sentence in split_sentences(text) {
        let tokens = tokenize(&text[sentence]);
        for n in low..=high {
            for window in tokens.windows(n) {
                let gram = window.join(" ");
                if seen.insert(gram.clone()) {
                    out.push(gram);
                }
            }
        }
    }
    out
}

/// The `span` candidates of `doc` most similar to `query`, best first; equal
/// scores order alphabetically.
pub fn extract_keywords(
    doc: &Document,
    query: &str,
    span: usize,
    ngram_range: (usize, usize),
    embedder: &dyn Embedder,
) -> Result<Vec<KeywordCandidate>> {
    let query_vec = embedder.embed_one(query)?;
    keywords_against(doc, &query_vec, span, ngram_range, embedder)
}

fn keywords_against(
    doc: &Document,
    query_vec: &EmbeddingVector,
    span: usize,
    ngram_range: (usize, usize),
    embedder: &dyn Embedder,
) -> Result<Vec<KeywordCandidate>> {
    validate_ngram_range(ngram_range)?;
    let candidates = candidate_ngrams(&doc.text, ngram_range);
    if candidates.is_empty() || span == 0 {
        return Ok(Vec::new());
    }
    let texts: Vec<&str> = candidates.iter().map(String::as_str).collect();
    let vectors = embedder.embed(&texts)?;
    let mut scored = candidates
        .into_iter()
        .zip(&vectors)
        .map(|(text, v)| {
            Ok(KeywordCandidate {
                score: cosine_similarity(query_vec, v)?,
                text,
                source_doc: doc.doc_id.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.text.cmp(&b.text))
    });
    scored.truncate(span);
    Ok(scored)
}

/// Keywords from the top `keyword_top_docs` guided documents, concatenated in
/// rank order. Cross-document duplicates are kept.
pub fn augment_keywords(
    guided: &RankedList,
    turn: &ConversationTurn,
    cfg: &EnrichmentConfig,
    docs: &dyn DocLookup,
    embedder: &dyn Embedder,
) -> Result<Vec<KeywordCandidate>> {
    let top = clamp_top_docs(cfg.keyword_top_docs, guided.len(), "keyword augmentation");
    if top == 0 {
        return Ok(Vec::new());
    }
    let query_vec = embedder.embed_one(&turn.baseline_query)?;
    let mut out = Vec::new();
    for entry in &guided.entries[..top] {
        let doc = docs.require(&entry.doc_id)?;
        out.extend(keywords_against(
            doc,
            &query_vec,
            cfg.keyword_span,
            cfg.ngram_range,
            embedder,
        )?);
    }
    Ok(out)
}
