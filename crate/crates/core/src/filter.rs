//! Redundancy filtering of enrichment items and assembly of the final query.
//!
//! ```text
//! QueryScore   = 10 · (1 − cos(query, item))
//! HistoryScore = max_i 10 · (1 − cos(history[i], item))
//! FilterScore  = (QueryScore + HistoryScore) / 2
//! ```
//!
//! Items whose FilterScore falls below the threshold are dropped. Scores live
//! in `[0, 20]`, not `[1, 10]`: nothing is rescaled or clamped beyond the
//! cosine itself.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::guided::{ConversationTurn, QueryKey};

/// How per-history-turn distances are aggregated into HistoryScore.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryAggregation {
    /// Largest distance to any history query.
    #[default]
    MaxDistance,
    /// Smallest distance, i.e. the most similar history query.
    MinDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Keyword,
    Answer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentItem {
    pub kind: ItemKind,
    pub text: String,
    pub embedding: Option<EmbeddingVector>,
    pub filter_score: Option<f64>,
}

impl EnrichmentItem {
    pub fn keyword(text: impl Into<String>) -> Self {
        Self::new(ItemKind::Keyword, text)
    }

    pub fn answer(text: impl Into<String>) -> Self {
        Self::new(ItemKind::Answer, text)
    }

    fn new(kind: ItemKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
            embedding: None,
            filter_score: None,
        }
    }
}

fn distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    Ok(10.0 * (1.0 - cosine_similarity(a, b)?))
}

pub fn query_score(query: &EmbeddingVector, item: &EmbeddingVector) -> Result<f64> {
    distance(query, item)
}

/// Aggregated distance between the item and every history query. An empty
/// history scores 0.
pub fn history_score(
    history: &[EmbeddingVector],
    item: &EmbeddingVector,
    aggregation: HistoryAggregation,
) -> Result<f64> {
    if history.is_empty() {
        tracing::debug!("no history; HistoryScore defaults to 0");
        return Ok(0.0);
    }
    let distances = history
        .iter()
        .map(|h| distance(h, item))
        .collect::<Result<Vec<_>>>()?;
    let pick = match aggregation {
        HistoryAggregation::MaxDistance => f64::max,
        HistoryAggregation::MinDistance => f64::min,
    };
    Ok(distances.into_iter().reduce(pick).expect("non-empty"))
}

pub fn filter_score(query_score: f64, history_score: f64) -> f64 {
    (query_score + history_score) / 2.0
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterOutcome {
    pub kept: Vec<EnrichmentItem>,
    pub dropped: Vec<EnrichmentItem>,
}

/// Score every item against the turn's baseline query and history with the
/// filter-stage embedder. Items scoring at least `threshold` are kept; both
/// partitions preserve input order.
pub fn filter_items(
    items: Vec<EnrichmentItem>,
    turn: &ConversationTurn,
    threshold: f64,
    embedder: &dyn Embedder,
    aggregation: HistoryAggregation,
) -> Result<FilterOutcome> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidInput(format!(
            "filter threshold must be non-negative, got {threshold}"
        )));
    }
    if items.is_empty() {
        return Ok(FilterOutcome::default());
    }
    let query = embedder.embed_one(&turn.baseline_query)?;
    let history_texts: Vec<&str> = turn
        .history
        .iter()
        .map(String::as_str)
        .filter(|h| !h.trim().is_empty())
        .collect();
    let history = if history_texts.is_empty() {
        Vec::new()
    } else {
        embedder.embed(&history_texts)?
    };
    let item_texts: Vec<&str> = items.iter().map(|i| i.text.as_str()).collect();
    let vectors = embedder.embed(&item_texts)?;

    let mut outcome = FilterOutcome::default();
    for (mut item, vector) in items.into_iter().zip(vectors) {
        let qs = query_score(&query, &vector)?;
        let hs = history_score(&history, &vector, aggregation)?;
        let score = filter_score(qs, hs);
        item.filter_score = Some(score);
        item.embedding = Some(vector);
        if score >= threshold {
            outcome.kept.push(item);
        } else {
            outcome.dropped.push(item);
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedItem {
    pub text: String,
    pub kind: ItemKind,
    pub filter_score: f64,
}

/// One reformulated-queries jsonl record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReformulatedQuery {
    pub conversation_id: String,
    pub turn_id: u32,
    pub baseline: String,
    pub kept_keywords: Vec<String>,
    pub kept_answer: String,
    pub final_text: String,
    #[serde(default)]
    pub dropped: Vec<DroppedItem>,
}

impl ReformulatedQuery {
    pub fn turn_key(&self) -> QueryKey {
        QueryKey::new(self.conversation_id.clone(), self.turn_id)
    }
}

/// `baseline ⧺ keywords ⧺ answer`, space separated, with empty parts elided.
/// Keywords are deduplicated case-insensitively, first occurrence wins.
pub fn unify<S: AsRef<str>>(
    turn: &ConversationTurn,
    kept_keywords: &[S],
    kept_answer: &str,
) -> ReformulatedQuery {
    let mut seen = HashSet::new();
    let keywords: Vec<String> = kept_keywords
        .iter()
        .map(|k| k.as_ref().trim())
        .filter(|k| !k.is_empty() && seen.insert(k.to_lowercase()))
        .map(str::to_string)
        .collect();
    let answer = kept_answer.trim();
    let mut final_text = turn.baseline_query.clone();
    for part in keywords.iter().map(String::as_str).chain([answer]) {
        if !part.is_empty() {
            final_text.push(' ');
            final_text.push_str(part);
        }
    }
    ReformulatedQuery {
        conversation_id: turn.conversation_id.clone(),
        turn_id: turn.turn_id,
        baseline: turn.baseline_query.clone(),
        kept_keywords: keywords,
        kept_answer: answer.to_string(),
        final_text,
        dropped: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec(), "t")
    }

    fn turn(baseline: &str, history: &[&str]) -> ConversationTurn {
        ConversationTurn {
            conversation_id: "49".into(),
            turn_id: history.len() as u32 + 1,
            raw_query: baseline.into(),
            baseline_query: baseline.into(),
            history: history.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn query_score_extremes() {
        let a = v(&[1.0, 0.0]);
        assert_eq!(query_score(&a, &a).unwrap(), 0.0);
        assert!((query_score(&a, &v(&[0.0, 1.0])).unwrap() - 10.0).abs() < 1e-12);
        // cos((1,2,2),(2,1,2)) = 8/9
        let qs = query_score(&v(&[1.0, 2.0, 2.0]), &v(&[2.0, 1.0, 2.0])).unwrap();
        assert!((qs - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn history_score_cases() {
        let item = v(&[1.0, 0.0]);
        assert_eq!(
            history_score(
                std::slice::from_ref(&item),
                &item,
                HistoryAggregation::MaxDistance
            )
            .unwrap(),
            0.0
        );
        let hist = [item.clone(), v(&[0.0, 1.0])];
        assert!(
            (history_score(&hist, &item, HistoryAggregation::MaxDistance).unwrap() - 10.0).abs()
                < 1e-12
        );
        assert_eq!(
            history_score(&hist, &item, HistoryAggregation::MinDistance).unwrap(),
            0.0
        );
        assert_eq!(
            history_score(&[], &item, HistoryAggregation::MaxDistance).unwrap(),
            0.0
        );
    }

    #[test]
    fn filter_score_is_mean() {
        assert_eq!(filter_score(0.0, 0.0), 0.0);
        assert_eq!(filter_score(10.0, 0.0), 5.0);
    }

    #[test]
    fn redundant_item_dropped() {
        let e = HashEmbedder::new(64, 11).unwrap();
        let t = turn("throat cancer cure", &["throat cancer cure"]);
        let out = filter_items(
            vec![
                EnrichmentItem::keyword("throat cancer cure"),
                EnrichmentItem::keyword("hulu"),
            ],
            &t,
            0.01,
            &e,
            HistoryAggregation::MaxDistance,
        )
        .unwrap();
        assert_eq!(out.dropped.len(), 1);
        assert_eq!(out.dropped[0].text, "throat cancer cure");
        assert!(out.dropped[0].filter_score.unwrap().abs() < 1e-9);
        assert_eq!(out.kept[0].text, "hulu");
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let e = HashEmbedder::new(64, 11).unwrap();
        let t = turn("what is x", &[]);
        let items = vec![
            EnrichmentItem::keyword("what is x"),
            EnrichmentItem::answer("x is y."),
        ];
        let out = filter_items(items, &t, 0.0, &e, HistoryAggregation::MaxDistance).unwrap();
        assert_eq!(out.kept.len(), 2);
        assert!(out.dropped.is_empty());
    }

    #[test]
    fn negative_threshold_rejected() {
        let e = HashEmbedder::new(64, 11).unwrap();
        let t = turn("q", &[]);
        assert!(filter_items(vec![], &t, -1.0, &e, HistoryAggregation::MaxDistance).is_err());
    }

    #[test]
    fn unify_shapes() {
        let t = turn("What are Netflix's other competitors?", &[]);
        let empty: [&str; 0] = [];
        assert_eq!(unify(&t, &empty, "").final_text, t.baseline_query);

        let q = unify(&t, &["netflix", "competitors", "Netflix"], "");
        assert_eq!(q.kept_keywords, vec!["netflix", "competitors"]);
        assert_eq!(
            q.final_text,
            "What are Netflix's other competitors? netflix competitors"
        );

        let q = unify(
            &t,
            &["netflix", "competitors", "subscription", "streaming"],
            "Amazon Instant Video Service and the Hulu Plus service",
        );
        assert_eq!(
            q.final_text,
            "What are Netflix's other competitors? netflix competitors subscription streaming \
             Amazon Instant Video Service and the Hulu Plus service"
        );

        let only_answer = unify(&t, &empty, "Hulu.");
        assert_eq!(
            only_answer.final_text,
            "What are Netflix's other competitors? Hulu."
        );
    }
}
