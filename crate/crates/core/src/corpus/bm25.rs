//! Okapi BM25 over a [`CorpusIndex`].
//!
//! ```text
//! score(D, Q) = Σ_t qtf(t) · idf(t) · tf(t, D) · (k1 + 1) / (tf(t, D) + k1 · (1 − b + b · |D| / avgdl))
//! idf(t)      = ln(1 + (N − df(t) + 0.5) / (df(t) + 0.5))
//! ```
//!
//! Repeated query terms count once per occurrence (`qtf`), so expansion
//! terms that repeat the baseline query reinforce it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{tokenize, CorpusIndex};
use crate::error::{Error, Result};
use crate::guided::ScoredDoc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

/// Top-`k` documents for `query_text`, ordered by score descending and then
/// doc_id ascending. Only documents sharing at least one query term appear.
pub fn bm25_retrieve(
    index: &CorpusIndex,
    query_text: &str,
    k: usize,
    params: Bm25Params,
) -> Result<Vec<ScoredDoc>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut query_terms: BTreeMap<String, u32> = BTreeMap::new();
    for token in tokenize(query_text) {
        *query_terms.entry(token).or_default() += 1;
    }
    if query_terms.is_empty() {
        return Err(Error::EmptyQuery);
    }

    let n = index.doc_count() as f64;
    let avgdl = index.avg_doc_length();
    let Bm25Params { k1, b } = params;
    let mut scores: Vec<Option<f64>> = vec![None; index.doc_count()];
    for (term, &qtf) in &query_terms {
        let postings = index.postings(term);
        if postings.is_empty() {
            continue;
        }
        let df = postings.len() as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        for posting in postings {
            let pos = posting.doc as usize;
            let tf = posting.tf as f64;
            let dl = index.doc_length(pos) as f64;
            let weight =
                qtf as f64 * idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
            *scores[pos].get_or_insert(0.0) += weight;
        }
    }

    let mut hits: Vec<(usize, f64)> = scores
        .into_iter()
        .enumerate()
        .filter_map(|(pos, s)| s.map(|s| (pos, s)))
        .collect();
    hits.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.doc_at(a.0).doc_id.cmp(&index.doc_at(b.0).doc_id))
    });
    hits.truncate(k);
    Ok(hits
        .into_iter()
        .map(|(pos, score)| ScoredDoc::new(index.doc_at(pos).doc_id.clone(), score))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn toy() -> CorpusIndex {
        CorpusIndex::build(vec![
            Document::new("d1", "throat cancer has a high cure rate"),
            Document::new("d2", "netflix competes with hulu and amazon"),
            Document::new("d3", "early detection of cancer improves outcomes"),
            Document::new("d4", "streaming subscription prices keep rising"),
        ])
        .unwrap()
    }

    #[test]
    fn exact_text_ranks_first() {
        let index = toy();
        let hits = bm25_retrieve(
            &index,
            "netflix competes with hulu and amazon",
            4,
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(hits[0].doc_id, "d2");
    }

    #[test]
    fn only_matching_documents_returned() {
        let index = toy();
        let hits = bm25_retrieve(&index, "cancer", 1000, Bm25Params::default()).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids.len(), 2);
        assert!(ids.contains(&"d1") && ids.contains(&"d3"));
    }

    #[test]
    fn ties_break_by_doc_id() {
        let index = CorpusIndex::build(vec![
            Document::new("b", "same words here"),
            Document::new("a", "same words here"),
        ])
        .unwrap();
        let hits = bm25_retrieve(&index, "words", 2, Bm25Params::default()).unwrap();
        assert_eq!(hits[0].doc_id, "a");
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn empty_query_is_an_error() {
        let index = toy();
        assert!(matches!(
            bm25_retrieve(&index, " ?! ", 3, Bm25Params::default()),
            Err(Error::EmptyQuery)
        ));
    }
}
