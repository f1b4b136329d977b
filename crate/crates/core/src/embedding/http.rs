//! Client for a remote embedding service.
//!
//! `POST {endpoint}/embed` with `{"model": ..., "texts": [...]}`; the service
//! answers `{"vectors": [[...], ...]}` in request order.

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_inputs, Embedder, EmbedderSpec, EmbeddingVector, MIN_DIMENSION};
use crate::error::{Error, Result};
use crate::http::{join_url, JsonClient, RetryPolicy, Semaphore};

/// Environment variable holding the bearer token for the embedding service.
pub const API_KEY_ENV: &str = "GCQR_EMBED_API_KEY";

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

pub struct HttpEmbedder {
    url: String,
    model: String,
    batch_size: usize,
    expected_dimension: Option<usize>,
    observed_dimension: OnceLock<usize>,
    client: JsonClient,
    in_flight: Semaphore,
    id: Arc<str>,
}

impl HttpEmbedder {
    pub fn new(spec: &EmbedderSpec) -> Result<Self> {
        spec.validate()?;
        let endpoint = spec.endpoint.clone().expect("validated");
        let model = spec.model_name.clone().unwrap_or_default();
        let bearer = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(Self {
            url: join_url(&endpoint, "embed"),
            id: format!("http:{endpoint}#{model}").into(),
            model,
            batch_size: spec.batch_size,
            expected_dimension: spec.dimension,
            observed_dimension: OnceLock::new(),
            client: JsonClient::new(
                Duration::from_secs(spec.timeout_secs),
                bearer,
                RetryPolicy {
                    max_retries: spec.max_retries,
                    backoff: Duration::from_millis(spec.backoff_ms),
                },
            ),
            in_flight: Semaphore::new(spec.max_in_flight),
        })
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let response: EmbedResponse = {
            let _permit = self.in_flight.acquire();
            self.client.post(
                &self.url,
                &EmbedRequest {
                    model: &self.model,
                    texts,
                },
            )?
        };
        let protocol = |message: String| Error::Protocol {
            url: self.url.clone(),
            message,
        };
        if response.vectors.len() != texts.len() {
            return Err(protocol(format!(
                "sent {} texts but received {} vectors",
                texts.len(),
                response.vectors.len()
            )));
        }
        for vector in &response.vectors {
            let dim = vector.len();
            let expected = self
                .expected_dimension
                .unwrap_or_else(|| *self.observed_dimension.get_or_init(|| dim));
            if dim != expected || dim < MIN_DIMENSION {
                return Err(protocol(format!(
                    "vector of dimension {dim}, expected {expected} (minimum {MIN_DIMENSION})"
                )));
            }
        }
        Ok(response.vectors)
    }
}

impl Embedder for HttpEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        check_inputs(texts)?;
        let batches: Vec<&[&str]> = texts.chunks(self.batch_size).collect();
        let results: Vec<Result<Vec<Vec<f64>>>> = if batches.len() == 1 {
            vec![self.embed_batch(batches[0])]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = batches
                    .iter()
                    .map(|batch| scope.spawn(move || self.embed_batch(batch)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            })
        };
        let mut out = Vec::with_capacity(texts.len());
        for batch in results {
            out.extend(
                batch?
                    .into_iter()
                    .map(|values| EmbeddingVector::new(values, self.id.clone())),
            );
        }
        Ok(out)
    }
}
