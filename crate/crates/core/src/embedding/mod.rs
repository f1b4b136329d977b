//! Text embedding providers and cosine similarity.
//!
//! Every stage of the pipeline that needs vectors (both re-ranking passes,
//! keyword scoring, answer selection, filtering) is bound to its own
//! [`EmbedderSpec`], so stages can use different models.

mod hashing;
mod http;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hashing::{fnv1a64, HashEmbedder};
pub use http::{HttpEmbedder, API_KEY_ENV};

/// Smallest dimension any provider may produce.
pub const MIN_DIMENSION: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: Arc<str>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, provider_id: impl Into<Arc<str>>) -> Self {
        Self {
            values,
            provider_id: provider_id.into(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `dot(u, v) / (‖u‖ ‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    cosine(&u.values, &v.values)
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Deterministic,
    Http,
}

fn default_batch_size() -> usize {
    64
}
fn default_max_in_flight() -> usize {
    4
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    200
}
fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl EmbedderSpec {
    pub fn deterministic(dimension: usize, seed: u64) -> Self {
        Self {
            kind: EmbedderKind::Deterministic,
            dimension: Some(dimension),
            endpoint: None,
            model_name: None,
            seed: Some(seed),
            batch_size: default_batch_size(),
            max_in_flight: default_max_in_flight(),
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn http(endpoint: impl Into<String>, model_name: Option<String>) -> Self {
        Self {
            kind: EmbedderKind::Http,
            dimension: None,
            endpoint: Some(endpoint.into()),
            model_name,
            seed: None,
            batch_size: default_batch_size(),
            max_in_flight: default_max_in_flight(),
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if let Some(d) = self.dimension {
            if d < MIN_DIMENSION {
                return Err(Error::Config(format!(
                    "embedding dimension {d} is below the minimum of {MIN_DIMENSION}"
                )));
            }
        }
        match self.kind {
            EmbedderKind::Deterministic => {
                if self.dimension.is_none() || self.seed.is_none() {
                    return fail("deterministic embedder requires dimension and seed");
                }
            }
            EmbedderKind::Http => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    return fail("http embedder requires endpoint");
                }
                if self.batch_size == 0 || self.max_in_flight == 0 {
                    return fail("http embedder batch_size and max_in_flight must be at least 1");
                }
            }
        }
        Ok(())
    }
}

pub trait Embedder: Send + Sync {
    /// Stable identity of the provider + model + parameters.
    fn provider_id(&self) -> &str;

    /// One vector per input text, order preserved.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        let mut out = self.embed(&[text])?;
        Ok(out.swap_remove(0))
    }
}

pub(crate) fn check_inputs(texts: &[&str]) -> Result<()> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("nothing to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(Error::InvalidInput(format!("text {i} is empty")));
    }
    Ok(())
}

/// In-memory per-run memo keyed by text. One memo wraps exactly one provider,
/// so the key is effectively `(provider_id, text)`.
pub struct Memoized {
    inner: Box<dyn Embedder>,
    cache: Mutex<HashMap<String, EmbeddingVector>>,
}

impl Memoized {
    pub fn new(inner: Box<dyn Embedder>) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

impl Embedder for Memoized {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        check_inputs(texts)?;
        let mut missing: Vec<&str> = {
            let cache = self.cache.lock().unwrap();
            texts
                .iter()
                .copied()
                .filter(|t| !cache.contains_key(*t))
                .collect()
        };
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            let fresh = self.inner.embed(&missing)?;
            let mut cache = self.cache.lock().unwrap();
            for (text, vector) in missing.into_iter().zip(fresh) {
                cache.insert(text.to_string(), vector);
            }
        }
        let cache = self.cache.lock().unwrap();
        Ok(texts.iter().map(|t| cache[*t].clone()).collect())
    }
}

/// Construct the provider described by `spec`, wrapped in a per-run memo.
pub fn build_embedder(spec: &EmbedderSpec) -> Result<Arc<dyn Embedder>> {
    spec.validate()?;
    let inner: Box<dyn Embedder> = match spec.kind {
        EmbedderKind::Deterministic => Box::new(HashEmbedder::new(
            spec.dimension.expect("validated"),
            spec.seed.expect("validated"),
        )?),
        EmbedderKind::Http => Box::new(HttpEmbedder::new(spec)?),
    };
    Ok(Arc::new(Memoized::new(inner)))
}

/// One-shot convenience: build the provider and embed `texts`.
pub fn embed(spec: &EmbedderSpec, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
    build_embedder(spec)?.embed(texts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec(), "test")
    }

    #[test]
    fn cosine_known_values() {
        let u = v(&[1.0, 2.0, 2.0]);
        let w = v(&[2.0, 1.0, 2.0]);
        // dot = 8, norms = 3 and 3
        assert!((cosine_similarity(&u, &w).unwrap() - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 3.0])).unwrap(),
            0.0
        );
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
        assert!(matches!(
            cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(EmbedderSpec::deterministic(64, 7).validate().is_ok());
        assert!(EmbedderSpec::deterministic(4, 7).validate().is_err());
        let mut no_seed = EmbedderSpec::deterministic(64, 7);
        no_seed.seed = None;
        assert!(no_seed.validate().is_err());
        let mut no_endpoint = EmbedderSpec::http("http://x", None);
        no_endpoint.endpoint = None;
        assert!(no_endpoint.validate().is_err());
    }

    #[test]
    fn memo_returns_same_vectors_as_provider() {
        let raw = HashEmbedder::new(32, 3).unwrap();
        let memo = Memoized::new(Box::new(HashEmbedder::new(32, 3).unwrap()));
        let texts = ["alpha beta", "gamma", "alpha beta"];
        let direct = raw.embed(&texts).unwrap();
        let cached = memo.embed(&texts).unwrap();
        assert_eq!(direct, cached);
        assert_eq!(memo.cached_len(), 2);
        assert_eq!(memo.embed(&["gamma"]).unwrap()[0], direct[1]);
    }

    #[test]
    fn empty_text_is_rejected() {
        let memo = build_embedder(&EmbedderSpec::deterministic(64, 7)).unwrap();
        assert!(matches!(memo.embed(&[""]), Err(Error::InvalidInput(_))));
        assert!(matches!(memo.embed(&[]), Err(Error::InvalidInput(_))));
    }
}
