// SPDX-License-Identifier: Apache-2.0

//! Generational passage index with a BM25 inverted index and a dense vector table.
//!
//! Each [`IndexGeneration`] is immutable. [`HybridIndex::refresh`] builds the
//! next generation off to the side and publishes it with one atomic pointer
//! swap; a reader that took a snapshot keeps querying that generation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use chrono::{DateTime, Utc};

use super::embed::Embedder;
use super::expand::ExpandedQuery;
use super::{Document, RetrievalError};
use crate::text::{split_sentences, tokenize};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
/// Documents longer than this (in characters) are split into sentence-bounded passages.
pub const MAX_PASSAGE_CHARS: usize = 1000;

/// One indexed, citable unit of text.
#[derive(Debug, Clone, PartialEq)]
pub struct Passage {
    /// Equal to `doc_id` for unsplit documents, `<doc_id>.p<n>` otherwise.
    pub passage_id: String,
    pub doc_id: String,
    pub source_module: String,
    pub text: String,
    pub published_at: DateTime<Utc>,
    /// The document's `user_id` metadata, for per-user records.
    pub owner: Option<String>,
}

/// Document metadata key naming the user a record belongs to.
pub const OWNER_KEY: &str = "user_id";

/// Restricts a search to passages from a set of modules and, optionally, to
/// records that are either unowned or owned by one user.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchScope {
    pub modules: Option<BTreeSet<String>>,
    pub owner: Option<String>,
}

impl SearchScope {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn modules<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            modules: Some(ids.into_iter().map(Into::into).collect()),
            owner: None,
        }
    }

    /// Hides records owned by anyone other than `user_id`.
    pub fn for_user(mut self, user_id: impl Into<String>) -> Self {
        self.owner = Some(user_id.into());
        self
    }

    fn admits(&self, p: &Passage) -> bool {
        self.modules.as_ref().is_none_or(|m| m.contains(&p.source_module))
            && match (&self.owner, &p.owner) {
                (Some(me), Some(owner)) => me == owner,
                _ => true,
            }
    }
}

fn split_document(doc: &Document) -> Vec<Passage> {
    let mk = |passage_id: String, text: String| Passage {
        passage_id,
        doc_id: doc.doc_id.clone(),
        source_module: doc.source_module.clone(),
        text,
        published_at: doc.published_at,
        owner: doc.metadata.get(OWNER_KEY).cloned(),
    };
    if doc.text.chars().count() <= MAX_PASSAGE_CHARS {
        return vec![mk(doc.doc_id.clone(), doc.text.clone())];
    }
    let mut chunks: Vec<String> = Vec::new();
    let mut cur = String::new();
    for s in split_sentences(&doc.text) {
        let extra = s.chars().count() + usize::from(!cur.is_empty());
        if !cur.is_empty() && cur.chars().count() + extra > MAX_PASSAGE_CHARS {
            chunks.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(s);
    }
    if !cur.is_empty() {
        chunks.push(cur);
    }
    chunks
        .into_iter()
        .enumerate()
        .map(|(i, t)| mk(format!("{}.p{}", doc.doc_id, i + 1), t))
        .collect()
}

/// An immutable snapshot of the corpus and both indices.
#[derive(Debug)]
pub struct IndexGeneration {
    generation: u64,
    dimension: usize,
    documents: BTreeMap<String, Document>,
    passages: Vec<Passage>,
    passage_ix: HashMap<String, usize>,
    postings: HashMap<String, Vec<(usize, u32)>>,
    lengths: Vec<u32>,
    avg_len: f64,
    vectors: Vec<Vec<f64>>,
}

impl IndexGeneration {
    fn build(
        generation: u64,
        documents: BTreeMap<String, Document>,
        embedder: &dyn Embedder,
    ) -> Result<Self, RetrievalError> {
        let mut passages = Vec::new();
        for doc in documents.values() {
            passages.extend(split_document(doc));
        }
        let mut passage_ix = HashMap::with_capacity(passages.len());
        for (i, p) in passages.iter().enumerate() {
            if passage_ix.insert(p.passage_id.clone(), i).is_some() {
                return Err(RetrievalError::DuplicateId(p.passage_id.clone()));
            }
        }
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut lengths = Vec::with_capacity(passages.len());
        for (i, p) in passages.iter().enumerate() {
            let toks = tokenize(&p.text);
            lengths.push(toks.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in toks {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push((i, n));
            }
        }
        let avg_len = if passages.is_empty() {
            0.0
        } else {
            lengths.iter().map(|&l| l as f64).sum::<f64>() / passages.len() as f64
        };
        let vectors = passages.iter().map(|p| embedder.embed(&p.text)).collect();
        Ok(Self {
            generation,
            dimension: embedder.dimension(),
            documents,
            passages,
            passage_ix,
            postings,
            lengths,
            avg_len,
            vectors,
        })
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of documents.
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn passage_count(&self) -> usize {
        self.passages.len()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn passage(&self, passage_id: &str) -> Option<&Passage> {
        self.passage_ix.get(passage_id).map(|&i| &self.passages[i])
    }

    fn admits(&self, i: usize, query: &ExpandedQuery, scope: &SearchScope) -> bool {
        let p = &self.passages[i];
        scope.admits(p)
            && query
                .time_window
                .is_none_or(|w| w.contains(p.published_at.date_naive()))
    }

    /// BM25 over the query's search terms, each term counted once.
    ///
    /// `idf = ln(1 + (N - df + 0.5) / (df + 0.5))`, with `N`, `df` and the
    /// average length taken over the whole generation. Passages matching no
    /// term are not returned. Ties break on ascending passage id.
    pub fn sparse_search(&self, query: &ExpandedQuery, k: usize, scope: &SearchScope) -> Vec<(String, f64)> {
        let n = self.passages.len() as f64;
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for term in query.search_terms() {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let df = list.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for &(i, tf) in list {
                if !self.admits(i, query, scope) {
                    continue;
                }
                let tf = tf as f64;
                let norm = 1.0 - BM25_B + BM25_B * self.lengths[i] as f64 / self.avg_len;
                *scores.entry(i).or_default() += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm);
            }
        }
        self.top_k(scores.into_iter(), k)
    }

    /// Exact cosine scan. Ties break on ascending passage id.
    pub fn dense_search(
        &self,
        query_vector: &[f64],
        query: &ExpandedQuery,
        k: usize,
        scope: &SearchScope,
    ) -> Result<Vec<(String, f64)>, RetrievalError> {
        if query_vector.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dimension,
                found: query_vector.len(),
            });
        }
        let qn = norm(query_vector);
        let scored = (0..self.passages.len())
            .filter(|&i| self.admits(i, query, scope))
            .map(|i| {
                let v = &self.vectors[i];
                let den = qn * norm(v);
                let cos = if den == 0.0 { 0.0 } else { dot(query_vector, v) / den };
                (i, cos)
            });
        Ok(self.top_k(scored, k))
    }

    fn top_k(&self, scored: impl Iterator<Item = (usize, f64)>, k: usize) -> Vec<(String, f64)> {
        let mut v: Vec<(usize, f64)> = scored.collect();
        v.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.passages[a.0].passage_id.cmp(&self.passages[b.0].passage_id))
        });
        v.truncate(k);
        v.into_iter()
            .map(|(i, s)| (self.passages[i].passage_id.clone(), s))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Ranking helper shared with tests: descending score, ascending id.
pub fn cmp_ranked(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// The published index plus the embedder used to build it.
pub struct HybridIndex {
    current: ArcSwap<IndexGeneration>,
    embedder: Arc<dyn Embedder>,
    writer: Mutex<()>,
}

impl std::fmt::Debug for HybridIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let g = self.current.load();
        f.debug_struct("HybridIndex")
            .field("generation", &g.generation)
            .field("documents", &g.len())
            .finish()
    }
}

impl HybridIndex {
    /// An empty index at generation 0.
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        let empty = IndexGeneration::build(0, BTreeMap::new(), embedder.as_ref()).expect("empty index builds");
        Self {
            current: ArcSwap::from_pointee(empty),
            embedder,
            writer: Mutex::new(()),
        }
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn snapshot(&self) -> Arc<IndexGeneration> {
        self.current.load_full()
    }

    /// Publishes a new generation containing the current documents with
    /// `batch` added or replaced by `doc_id`.
    pub fn refresh(&self, batch: Vec<Document>) -> Result<Arc<IndexGeneration>, RetrievalError> {
        let mut seen = BTreeSet::new();
        for d in &batch {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(RetrievalError::DuplicateId(d.doc_id.clone()));
            }
        }
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let old = self.current.load_full();
        let mut docs = old.documents.clone();
        for d in batch {
            docs.insert(d.doc_id.clone(), d);
        }
        let next = Arc::new(IndexGeneration::build(old.generation + 1, docs, self.embedder.as_ref())?);
        self.current.store(next.clone());
        Ok(next)
    }
}
