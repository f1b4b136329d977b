//! Guided documents: first-stage retrieval with the baseline query followed by
//! two embedding re-ranking passes that keep the best handful.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{bm25_retrieve, truncate_tokens, Bm25Params, CorpusIndex, DocLookup};
use crate::embedding::{cosine_similarity, Embedder, EmbeddingVector};
use crate::error::{Error, Result};

/// Candidates pulled by the first-stage retriever.
pub const DEFAULT_GUIDED_N: usize = 2000;
/// Survivors of the first re-ranking pass.
pub const DEFAULT_INTERMEDIATE_KEEP: usize = 100;
/// Final guided documents per turn.
pub const DEFAULT_FINAL_KEEP: usize = 10;
/// Passages are cut to this many tokens before embedding.
pub const MAX_EMBED_TOKENS: usize = 512;

/// `(conversation_id, turn_id)`, written as `conversationid_turnid` in TREC files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueryKey {
    pub conversation_id: String,
    pub turn_id: u32,
}

impl QueryKey {
    pub fn new(conversation_id: impl Into<String>, turn_id: u32) -> Self {
        Self {
            conversation_id: conversation_id.into(),
            turn_id,
        }
    }

    pub fn qid(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for QueryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.conversation_id, self.turn_id)
    }
}

impl FromStr for QueryKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("query id {s:?} is not conversationid_turnid"));
        let (conv, turn) = s.rsplit_once('_').ok_or_else(bad)?;
        if conv.is_empty() {
            return Err(bad());
        }
        Ok(Self::new(conv, turn.parse().map_err(|_| bad())?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub conversation_id: String,
    pub turn_id: u32,
    pub raw_query: String,
    pub baseline_query: String,
    /// Prior turns' queries, oldest first.
    #[serde(default)]
    pub history: Vec<String>,
}

impl ConversationTurn {
    pub fn key(&self) -> QueryKey {
        QueryKey::new(self.conversation_id.clone(), self.turn_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Ordered `(doc_id, score)` pairs for one query: scores non-increasing,
/// doc_ids unique.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_key: QueryKey,
    pub entries: Vec<ScoredDoc>,
}

impl RankedList {
    pub fn new(query_key: QueryKey, entries: Vec<ScoredDoc>) -> Self {
        Self { query_key, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    pub fn is_well_formed(&self) -> bool {
        let ordered = self.entries.windows(2).all(|w| w[0].score >= w[1].score);
        let mut ids: Vec<&str> = self.doc_ids().collect();
        ids.sort_unstable();
        ordered && ids.windows(2).all(|w| w[0] != w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    #[default]
    Bm25,
    Dense,
}

enum Mode {
    Bm25(Bm25Params),
    Dense {
        embedder: Arc<dyn Embedder>,
        doc_vectors: Vec<EmbeddingVector>,
    },
}

/// First-stage retriever over a corpus index.
pub struct Retriever {
    index: Arc<CorpusIndex>,
    mode: Mode,
}

impl Retriever {
    pub fn bm25(index: Arc<CorpusIndex>, params: Bm25Params) -> Self {
        Self {
            index,
            mode: Mode::Bm25(params),
        }
    }

    /// Cosine ranking against document embeddings. Every document is
    /// embedded once, up front.
    pub fn dense(index: Arc<CorpusIndex>, embedder: Arc<dyn Embedder>) -> Result<Self> {
        let texts: Vec<&str> = index
            .documents()
            .iter()
            .map(|d| truncate_tokens(&d.text, MAX_EMBED_TOKENS))
            .collect();
        let doc_vectors = embedder.embed(&texts)?;
        Ok(Self {
            index,
            mode: Mode::Dense {
                embedder,
                doc_vectors,
            },
        })
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<ScoredDoc>> {
        match &self.mode {
            Mode::Bm25(params) => bm25_retrieve(&self.index, query, k, *params),
            Mode::Dense {
                embedder,
                doc_vectors,
            } => {
                if k == 0 {
                    return Err(Error::InvalidInput("k must be at least 1".into()));
                }
                if query.trim().is_empty() {
                    return Err(Error::EmptyQuery);
                }
                let q = embedder.embed_one(query)?;
                let mut hits = doc_vectors
                    .iter()
                    .enumerate()
                    .map(|(pos, v)| Ok((pos, cosine_similarity(&q, v)?)))
                    .collect::<Result<Vec<_>>>()?;
                let docs = self.index.documents();
                hits.sort_by(|a, b| {
                    b.1.total_cmp(&a.1)
                        .then_with(|| docs[a.0].doc_id.cmp(&docs[b.0].doc_id))
                });
                hits.truncate(k);
                Ok(hits
                    .into_iter()
                    .map(|(pos, s)| ScoredDoc::new(docs[pos].doc_id.clone(), s))
                    .collect())
            }
        }
    }
}

/// Top-`n` documents for the turn's baseline query.
pub fn retrieve_guided(
    retriever: &Retriever,
    turn: &ConversationTurn,
    n: usize,
) -> Result<RankedList> {
    if n == 0 {
        return Err(Error::InvalidInput("guided_n must be at least 1".into()));
    }
    let entries = retriever.retrieve(&turn.baseline_query, n)?;
    Ok(RankedList::new(turn.key(), entries))
}

/// Rescore every candidate by cosine between the query and document
/// embeddings, keep the best `keep`. Equal scores keep their prior order.
pub fn rerank_once(
    candidates: &RankedList,
    query: &str,
    embedder: &dyn Embedder,
    keep: usize,
    docs: &dyn DocLookup,
) -> Result<RankedList> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("nothing to re-rank".into()));
    }
    if keep == 0 {
        return Err(Error::InvalidInput("keep must be at least 1".into()));
    }
    let mut texts = Vec::with_capacity(candidates.len());
    for entry in &candidates.entries {
        let text = &docs.require(&entry.doc_id)?.text;
        let cut = truncate_tokens(text, MAX_EMBED_TOKENS);
        if cut.len() < text.len() {
            tracing::debug!(doc_id = %entry.doc_id, "passage truncated to {MAX_EMBED_TOKENS} tokens for embedding");
        }
        texts.push(cut);
    }
    let query_vec = embedder.embed_one(query)?;
    let doc_vecs = embedder.embed(&texts)?;

    let mut rescored = candidates
        .entries
        .iter()
        .zip(&doc_vecs)
        .map(|(entry, v)| {
            Ok(ScoredDoc::new(
                entry.doc_id.clone(),
                cosine_similarity(&query_vec, v)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    // stable: ties keep prior rank
    rescored.sort_by(|a, b| b.score.total_cmp(&a.score));
    rescored.truncate(keep);
    Ok(RankedList::new(candidates.query_key.clone(), rescored))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    /// Output of the first pass, `intermediate_keep` long at most.
    pub intermediate: RankedList,
    /// The final guided documents.
    pub guided: RankedList,
}

pub fn two_stage_rerank(
    candidates: &RankedList,
    query: &str,
    stage1: &dyn Embedder,
    stage2: &dyn Embedder,
    intermediate_keep: usize,
    final_keep: usize,
    docs: &dyn DocLookup,
) -> Result<RerankOutcome> {
    if intermediate_keep < final_keep {
        return Err(Error::InvalidInput(format!(
            "intermediate_keep ({intermediate_keep}) is smaller than final_keep ({final_keep})"
        )));
    }
    if stage1.provider_id() == stage2.provider_id() {
        tracing::warn!(
            provider = stage1.provider_id(),
            "both re-ranking passes use the same embedder"
        );
    }
    let intermediate = rerank_once(candidates, query, stage1, intermediate_keep, docs)?;
    let guided = rerank_once(&intermediate, query, stage2, final_keep, docs)?;
    Ok(RerankOutcome {
        intermediate,
        guided,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::embedding::HashEmbedder;

    fn index() -> Arc<CorpusIndex> {
        Arc::new(
            CorpusIndex::build(vec![
                Document::new("d1", "throat cancer has a high cure rate"),
                Document::new("d2", "early throat cancer treatment options"),
                Document::new("d3", "netflix competes with hulu"),
                Document::new("d4", "cancer research funding"),
                Document::new("d5", "what is the cure rate of throat cancer"),
            ])
            .unwrap(),
        )
    }

    fn turn(baseline: &str) -> ConversationTurn {
        ConversationTurn {
            conversation_id: "31".into(),
            turn_id: 1,
            raw_query: baseline.into(),
            baseline_query: baseline.into(),
            history: vec![],
        }
    }

    #[test]
    fn query_key_round_trip() {
        let key: QueryKey = "31_4".parse().unwrap();
        assert_eq!(key, QueryKey::new("31", 4));
        assert_eq!(key.to_string(), "31_4");
        let nested: QueryKey = "a_b_12".parse().unwrap();
        assert_eq!(nested.conversation_id, "a_b");
        assert!("nounderscore".parse::<QueryKey>().is_err());
        assert!("x_y".parse::<QueryKey>().is_err());
    }

    #[test]
    fn guided_truncates_to_corpus() {
        let retriever = Retriever::bm25(index(), Bm25Params::default());
        let list =
            retrieve_guided(&retriever, &turn("throat cancer cure"), DEFAULT_GUIDED_N).unwrap();
        assert!(list.len() <= 5);
        assert!(list.is_well_formed());
        let top2 = retrieve_guided(&retriever, &turn("throat cancer cure"), 2).unwrap();
        assert_eq!(top2.entries[..], list.entries[..2]);
    }

    #[test]
    fn identical_text_wins_rerank() {
        let idx = index();
        let retriever = Retriever::bm25(idx.clone(), Bm25Params::default());
        let t = turn("what is the cure rate of throat cancer");
        let list = retrieve_guided(&retriever, &t, 10).unwrap();
        let e = HashEmbedder::new(64, 7).unwrap();
        let top = rerank_once(&list, &t.baseline_query, &e, 1, idx.as_ref()).unwrap();
        assert_eq!(top.entries[0].doc_id, "d5");
        assert!((top.entries[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rerank_reports_missing_doc() {
        let idx = index();
        let e = HashEmbedder::new(64, 7).unwrap();
        let list = RankedList::new(QueryKey::new("1", 1), vec![ScoredDoc::new("ghost", 1.0)]);
        let err = rerank_once(&list, "q", &e, 5, idx.as_ref()).unwrap_err();
        assert!(matches!(err, Error::MissingDocument(ref id) if id == "ghost"));
    }

    #[test]
    fn stage_keeps_must_be_ordered() {
        let idx = index();
        let e = HashEmbedder::new(64, 7).unwrap();
        let list = RankedList::new(QueryKey::new("1", 1), vec![ScoredDoc::new("d1", 1.0)]);
        assert!(two_stage_rerank(&list, "q", &e, &e, 5, 10, idx.as_ref()).is_err());
    }

    #[test]
    fn dense_retriever_ranks_identical_text_first() {
        let idx = index();
        let e: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(128, 3).unwrap());
        let r = Retriever::dense(idx, e).unwrap();
        let hits = r.retrieve("netflix competes with hulu", 3).unwrap();
        assert_eq!(hits[0].doc_id, "d3");
        assert_eq!(hits.len(), 3);
    }
}
