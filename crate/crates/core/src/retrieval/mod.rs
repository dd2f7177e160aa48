// SPDX-License-Identifier: Apache-2.0

//! Hybrid evidence retrieval: BM25 sparse search, dense cosine search, query
//! expansion, and reciprocal-rank fusion into one ranked evidence list.

mod embed;
mod expand;
mod fusion;
mod index;
mod template;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{Embedder, HashingEmbedder, DEFAULT_EMBEDDING_DIM};
pub use expand::{expand_query, ExpandedQuery, Ontology, TimeWindow};
pub use fusion::{fuse, FusedHit, DEFAULT_RRF_K};
pub use index::{
    cmp_ranked, HybridIndex, IndexGeneration, Passage, SearchScope, BM25_B, BM25_K1, MAX_PASSAGE_CHARS, OWNER_KEY,
};
pub use template::{build_evidence_template, EvidenceBlock, EvidenceEntry};

use crate::grounding::is_valid_ref_id;
use crate::registry::Manifest;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("duplicate document or passage id `{0}`")]
    DuplicateId(String),
    #[error("query vector has dimension {found}, index expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("evidence template needs at least one passage")]
    EmptyEvidence,
    #[error("corpus line {line}: {reason}")]
    Corpus { line: usize, reason: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A unit of enterprise text as ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source_module: String,
    pub text: String,
    pub published_at: DateTime<Utc>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// A retrieved, citable passage with its per-retriever and fused scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePassage {
    /// Id used in `[ref:...]` tokens.
    pub passage_id: String,
    pub doc_id: String,
    pub source_module: String,
    pub passage_text: String,
    pub published_at: DateTime<Utc>,
    pub sparse_score: f64,
    pub dense_score: f64,
    pub fused_score: f64,
    pub fused_rank: usize,
}

/// Parses corpus JSONL. When a manifest is given, every `source_module` must
/// resolve in it. Document ids must be valid reference ids and unique.
pub fn parse_corpus(jsonl: &str, manifest: Option<&Manifest>) -> Result<Vec<Document>, RetrievalError> {
    let mut docs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| RetrievalError::Corpus { line: i + 1, reason };
        let d: Document = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if !is_valid_ref_id(&d.doc_id) {
            return Err(err(format!("doc_id `{}` must match [A-Za-z0-9._-]+", d.doc_id)));
        }
        if let Some(m) = manifest {
            if m.get_module(&d.source_module).is_err() {
                return Err(err(format!("unknown source_module `{}`", d.source_module)));
            }
        }
        if !seen.insert(d.doc_id.clone()) {
            return Err(RetrievalError::DuplicateId(d.doc_id));
        }
        docs.push(d);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<std::path::Path>, manifest: Option<&Manifest>) -> Result<Vec<Document>, RetrievalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RetrievalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text, manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub sparse_k: usize,
    pub dense_k: usize,
    pub fused_k: usize,
    pub rrf_k: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            sparse_k: 20,
            dense_k: 20,
            fused_k: 4,
            rrf_k: DEFAULT_RRF_K,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetrievalResult {
    /// Generation the whole query ran against.
    pub generation: u64,
    pub query: ExpandedQuery,
    pub passages: Vec<EvidencePassage>,
}

/// Expansion, both searches and fusion against one index snapshot.
pub struct HybridRetriever {
    index: Arc<HybridIndex>,
    ontology: Ontology,
    config: RetrievalConfig,
    calls: AtomicU64,
}

impl std::fmt::Debug for HybridRetriever {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HybridRetriever")
            .field("index", &self.index)
            .field("config", &self.config)
            .finish()
    }
}

impl HybridRetriever {
    pub fn new(index: Arc<HybridIndex>, ontology: Ontology, config: RetrievalConfig) -> Self {
        Self {
            index,
            ontology,
            config,
            calls: AtomicU64::new(0),
        }
    }

    pub fn index(&self) -> &Arc<HybridIndex> {
        &self.index
    }

    pub fn config(&self) -> RetrievalConfig {
        self.config
    }

    /// Number of `retrieve` calls so far.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn expand(&self, query: &str, reference_date: NaiveDate) -> ExpandedQuery {
        expand_query(query, &self.ontology, reference_date)
    }

    pub fn retrieve(
        &self,
        query: &str,
        reference_date: NaiveDate,
        scope: &SearchScope,
    ) -> Result<RetrievalResult, RetrievalError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let gen = self.index.snapshot();
        let expanded = self.expand(query, reference_date);
        let sparse = gen.sparse_search(&expanded, self.config.sparse_k, scope);
        let qv = self.index.embedder().embed(&expanded.embedding_text());
        let dense = gen.dense_search(&qv, &expanded, self.config.dense_k, scope)?;
        let passages = fuse(&sparse, &dense, self.config.fused_k, self.config.rrf_k)
            .into_iter()
            .map(|h| {
                let p = gen.passage(&h.id).expect("fused ids come from this generation");
                EvidencePassage {
                    passage_id: p.passage_id.clone(),
                    doc_id: p.doc_id.clone(),
                    source_module: p.source_module.clone(),
                    passage_text: p.text.clone(),
                    published_at: p.published_at,
                    sparse_score: h.sparse_score,
                    dense_score: h.dense_score,
                    fused_score: h.fused_score,
                    fused_rank: h.fused_rank,
                }
            })
            .collect();
        Ok(RetrievalResult {
            generation: gen.generation(),
            query: expanded,
            passages,
        })
    }
}
