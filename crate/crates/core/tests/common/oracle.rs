//! Brute-force reference implementations, written without the library's
//! helpers.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Lowercased alphanumeric runs, scanned character by character.
pub fn naive_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(cur.to_lowercase());
            cur.clear();
        }
    }
    if !cur.is_empty() {
        out.push(cur.to_lowercase());
    }
    out
}

/// Every document scored against every query term by direct counting.
/// Returns matching documents, best first, ties by doc id.
pub fn bm25_exhaustive(
    docs: &[(String, String)],
    query: &str,
    k1: f64,
    b: f64,
) -> Vec<(String, f64)> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|(_, t)| naive_tokens(t)).collect();
    let n = docs.len() as f64;
    let total: u64 = tokenized.iter().map(|t| t.len() as u64).sum();
    let avgdl = total as f64 / n;
    let mut qtf: BTreeMap<String, u32> = BTreeMap::new();
    for t in naive_tokens(query) {
        *qtf.entry(t).or_insert(0) += 1;
    }
    let mut hits = Vec::new();
    for (d, tokens) in tokenized.iter().enumerate() {
        let mut score: Option<f64> = None;
        for (term, &q) in &qtf {
            let tf = tokens.iter().filter(|t| *t == term).count();
            if tf == 0 {
                continue;
            }
            let df = tokenized.iter().filter(|ts| ts.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let tf = tf as f64;
            let dl = tokens.len() as f64;
            let w = q as f64 * idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
            score = Some(score.unwrap_or(0.0) + w);
        }
        if let Some(s) = score {
            hits.push((docs[d].0.clone(), s));
        }
    }
    hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    hits
}

/// `(qid, doc_id, rank)` triples.
pub type OracleRun = Vec<(String, String, u32)>;
pub type OracleQrels = HashMap<String, HashMap<String, u8>>;

fn ranked_docs(run: &OracleRun, qid: &str) -> Vec<String> {
    let mut rows: Vec<&(String, String, u32)> = run.iter().filter(|r| r.0 == qid).collect();
    rows.sort_by_key(|r| r.2);
    rows.into_iter().map(|r| r.1.clone()).collect()
}

fn run_qids(run: &OracleRun) -> BTreeSet<String> {
    run.iter().map(|r| r.0.clone()).collect()
}

/// Mean reciprocal rank over judged run queries with a relevant judgment.
pub fn mrr_oracle(run: &OracleRun, qrels: &OracleQrels, threshold: u8) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for qid in run_qids(run) {
        let Some(judged) = qrels.get(&qid) else {
            continue;
        };
        if !judged.values().any(|&r| r >= threshold) {
            continue;
        }
        count += 1;
        for (i, doc) in ranked_docs(run, &qid).iter().enumerate() {
            if judged.get(doc).copied().unwrap_or(0) >= threshold {
                sum += 1.0 / (i as f64 + 1.0);
                break;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean NDCG@k with linear gain over judged run queries.
pub fn ndcg_oracle(run: &OracleRun, qrels: &OracleQrels, k: usize) -> f64 {
    let mut values = Vec::new();
    for qid in run_qids(run) {
        let Some(judged) = qrels.get(&qid) else {
            continue;
        };
        let docs = ranked_docs(run, &qid);
        let mut dcg = 0.0;
        for (i, doc) in docs.iter().take(k).enumerate() {
            let rel = judged.get(doc).copied().unwrap_or(0) as f64;
            dcg += rel / (i as f64 + 2.0).log2();
        }
        let mut ideal: Vec<u8> = judged.values().copied().collect();
        ideal.sort();
        ideal.reverse();
        let mut idcg = 0.0;
        for (i, rel) in ideal.iter().take(k).enumerate() {
            idcg += *rel as f64 / (i as f64 + 2.0).log2();
        }
        values.push(if idcg > 0.0 { dcg / idcg } else { 0.0 });
    }
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// `(matched, total)` by set membership against the grade-4 documents.
pub fn keyword_precision_oracle(keywords: &[String], top_docs: &[&str]) -> (usize, usize) {
    let mut unique: Vec<String> = Vec::new();
    for k in keywords {
        let folded = k.trim().to_lowercase();
        if !folded.is_empty() && !unique.contains(&folded) {
            unique.push(folded);
        }
    }
    let doc_tokens: Vec<Vec<String>> = top_docs.iter().map(|d| naive_tokens(d)).collect();
    let matched = unique
        .iter()
        .filter(|k| {
            let tokens = naive_tokens(k);
            !tokens.is_empty()
                && tokens
                    .iter()
                    .all(|t| doc_tokens.iter().any(|doc| doc.contains(t)))
        })
        .count();
    (matched, unique.len())
}

/// FNV-1a 64 over seed bytes then gram bytes, bucketed 3-gram counts,
/// L2-normalized.
pub fn hash3_oracle(text: &str, dimension: usize, seed: u64) -> Vec<f64> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let grams: Vec<String> = if chars.len() < 3 {
        vec![chars.iter().collect()]
    } else {
        (0..=chars.len() - 3)
            .map(|i| chars[i..i + 3].iter().collect())
            .collect()
    };
    let mut v = vec![0.0; dimension];
    for g in grams {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut bytes = seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(g.as_bytes());
        for byte in bytes {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        v[(h % dimension as u64) as usize] += 1.0;
    }
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const VOCAB: &[&str] = &[
    "throat",
    "cancer",
    "netflix",
    "price",
    "bees",
    "honey",
    "nectar",
    "battery",
    "lithium",
    "sky",
    "blue",
    "scattering",
    "volcano",
    "ash",
    "lava",
    "river",
    "delta",
    "piano",
    "keys",
    "chess",
    "opening",
    "coffee",
    "caffeine",
    "tea",
    "rome",
    "empire",
    "glacier",
    "valley",
    "solar",
    "panel",
    "wind",
    "turbine",
    "heart",
    "blood",
    "penguin",
    "bird",
    "tower",
    "paris",
    "vaccine",
    "immune",
];

/// Text of `len` words drawn with a skew toward the front of the vocabulary.
pub fn random_text(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| {
            let a = rng.random_range(0..VOCAB.len());
            let b = rng.random_range(0..VOCAB.len());
            VOCAB[a.min(b)]
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> Vec<(String, String)> {
    (0..n)
        .map(|i| {
            let len = rng.random_range(3..40);
            (format!("doc{i:02}"), random_text(rng, len))
        })
        .collect()
}
