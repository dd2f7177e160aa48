// SPDX-License-Identifier: Apache-2.0

//! Embedding interface and a deterministic feature-hashing reference embedder.

use crate::text::tokenize;

/// Maps text to a unit-norm vector of fixed dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Signed feature hashing of token unigrams and bigrams, L2-normalized.
///
/// Text without tokens hashes a fixed sentinel feature so the output is still
/// unit-norm.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dim: usize,
}

pub const DEFAULT_EMBEDDING_DIM: usize = 64;

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM)
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    fn add(&self, v: &mut [f64], feature: &str, weight: f64) {
        let h = fnv1a(feature.as_bytes());
        let slot = (h % self.dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 1 { -1.0 } else { 1.0 };
        v[slot] += sign * weight;
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let tokens = tokenize(text);
        let mut v = vec![0.0; self.dim];
        for t in &tokens {
            self.add(&mut v, t, 1.0);
        }
        for pair in tokens.windows(2) {
            self.add(&mut v, &format!("{} {}", pair[0], pair[1]), 0.5);
        }
        let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // no tokens, or features that cancelled exactly
            v.iter_mut().for_each(|x| *x = 0.0);
            self.add(&mut v, "\u{0}empty", 1.0);
            norm = 1.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}
