//! MRR and NDCG@k with trec_eval conventions.
//!
//! A query is evaluated when it appears in both the run and the qrels. MRR is
//! averaged over evaluated queries that have at least one judged-relevant
//! document; NDCG over all evaluated queries (0 when the ideal DCG is 0).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{group_by_query, Qrels, RunEntry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// gain = rel (trec_eval's ndcg)
    #[default]
    Linear,
    /// gain = 2^rel − 1
    Exponential,
}

impl Gain {
    fn of(self, rel: u8) -> f64 {
        match self {
            Gain::Linear => rel as f64,
            Gain::Exponential => 2f64.powi(rel as i32) - 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub rel_threshold: u8,
    pub k: usize,
    pub gain: Gain,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            rel_threshold: 1,
            k: 3,
            gain: Gain::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    /// `None` when the query has no judged-relevant document.
    pub reciprocal_rank: Option<f64>,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mrr: f64,
    pub ndcg: f64,
    pub per_query: BTreeMap<String, QueryMetrics>,
    /// Queries present in both run and qrels.
    pub evaluated_queries: usize,
    /// Evaluated queries that count toward MRR.
    pub mrr_queries: usize,
    /// Query ids in the run without judgments.
    pub unjudged_queries: Vec<String>,
    /// Judged query ids the run does not cover.
    pub missing_queries: Vec<String>,
}

fn reciprocal_rank(
    ranked: &[&RunEntry],
    judged: &BTreeMap<String, u8>,
    threshold: u8,
) -> Option<f64> {
    if !judged.values().any(|&r| r >= threshold) {
        return None;
    }
    let first = ranked
        .iter()
        .position(|e| judged.get(&e.doc_id).is_some_and(|&r| r >= threshold));
    Some(first.map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

fn ndcg(ranked: &[&RunEntry], judged: &BTreeMap<String, u8>, k: usize, gain: Gain) -> f64 {
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, e)| gain.of(judged.get(&e.doc_id).copied().unwrap_or(0)) / discount(i))
        .sum();
    let mut ideal: Vec<u8> = judged.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| gain.of(r) / discount(i))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// All metrics plus a per-query breakdown.
pub fn evaluate(run: &[RunEntry], qrels: &Qrels, opts: &EvalOptions) -> Result<Evaluation> {
    if run.is_empty() {
        return Err(Error::InvalidInput("empty run".into()));
    }
    if opts.k == 0 {
        return Err(Error::InvalidInput("NDCG cutoff must be at least 1".into()));
    }
    let groups = group_by_query(run);
    let mut per_query = BTreeMap::new();
    let mut rrs = Vec::new();
    let mut ndcgs = Vec::new();
    let mut unjudged_queries = Vec::new();
    for (qid, ranked) in &groups {
        let Some(judged) = qrels.query(qid) else {
            unjudged_queries.push(qid.to_string());
            continue;
        };
        let rr = reciprocal_rank(ranked, judged, opts.rel_threshold);
        let nd = ndcg(ranked, judged, opts.k, opts.gain);
        rrs.extend(rr);
        ndcgs.push(nd);
        per_query.insert(
            qid.to_string(),
            QueryMetrics {
                reciprocal_rank: rr,
                ndcg: nd,
            },
        );
    }
    let missing_queries = qrels
        .query_ids()
        .filter(|q| !groups.contains_key(q))
        .map(str::to_string)
        .collect();
    Ok(Evaluation {
        mrr: mean(&rrs),
        ndcg: mean(&ndcgs),
        evaluated_queries: per_query.len(),
        mrr_queries: rrs.len(),
        per_query,
        unjudged_queries,
        missing_queries,
    })
}

pub fn mrr(run: &[RunEntry], qrels: &Qrels, rel_threshold: u8) -> Result<f64> {
    let opts = EvalOptions {
        rel_threshold,
        ..EvalOptions::default()
    };
    Ok(evaluate(run, qrels, &opts)?.mrr)
}

pub fn ndcg_at_k(run: &[RunEntry], qrels: &Qrels, k: usize, gain: Gain) -> Result<f64> {
    let opts = EvalOptions {
        k,
        gain,
        ..EvalOptions::default()
    };
    Ok(evaluate(run, qrels, &opts)?.ndcg)
}
