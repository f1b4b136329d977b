//! Character 3-gram feature hashing. Model-free and deterministic, so every
//! similarity-driven stage can run offline.

use std::sync::Arc;

use super::{check_inputs, Embedder, EmbeddingVector, MIN_DIMENSION};
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over `seed` (little-endian) followed by `bytes`.
pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    seed.to_le_bytes()
        .iter()
        .chain(bytes)
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
    id: Arc<str>,
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self> {
        if dimension < MIN_DIMENSION {
            return Err(Error::Config(format!(
                "embedding dimension {dimension} is below the minimum of {MIN_DIMENSION}"
            )));
        }
        Ok(Self {
            dimension,
            seed,
            id: format!("hash3:d{dimension}:s{seed}").into(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Bucket counts of the lowercased text's character 3-grams, L2-normalized.
    /// Texts shorter than three characters hash as a single gram.
    pub fn vector(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut counts = vec![0.0f64; self.dimension];
        let mut gram = String::with_capacity(12);
        let mut add = |gram: &str| {
            let bucket = fnv1a64(self.seed, gram.as_bytes()) % self.dimension as u64;
            counts[bucket as usize] += 1.0;
        };
        if chars.len() < 3 {
            gram.extend(&chars);
            add(&gram);
        } else {
            for window in chars.windows(3) {
                gram.clear();
                gram.extend(window);
                add(&gram);
            }
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        counts.iter_mut().for_each(|c| *c /= norm);
        counts
    }
}

impl Embedder for HashEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        check_inputs(texts)?;
        Ok(texts
            .iter()
            .map(|t| EmbeddingVector::new(self.vector(t), self.id.clone()))
            .collect())
    }
}
