// SPDX-License-Identifier: Apache-2.0

//! Indexes the demo corpus and walks one query through expansion, both
//! searches, rank fusion and the evidence block a generator would see.
//!
//! ```text
//! cargo run --example hybrid_search -- "samsung earnings last week"
//! ```

use std::sync::Arc;

use chrono::NaiveDate;
use groundpilot::demo;
use groundpilot::retrieval::{
    build_evidence_template, Embedder, HashingEmbedder, HybridIndex, HybridRetriever, RetrievalConfig, SearchScope,
};

fn main() {
    let query = std::env::args().nth(1).unwrap_or_else(|| "samsung earnings last week".into());
    let today = NaiveDate::from_ymd_opt(2025, 1, 10).expect("valid date");

    let embedder = Arc::new(HashingEmbedder::default());
    let index = Arc::new(HybridIndex::new(embedder.clone()));
    let snapshot = index.refresh(demo::corpus()).expect("demo corpus indexes");
    println!("generation {} with {} passages", snapshot.generation(), snapshot.len());

    let config = RetrievalConfig::default();
    let retriever = HybridRetriever::new(index.clone(), demo::ontology(), config);
    let expanded = retriever.expand(&query, today);
    println!("query {:?}", expanded.original);
    println!("  expansion {:?}", expanded.expansion_terms);
    println!("  window    {:?}", expanded.time_window);

    let scope = SearchScope::all();
    let sparse = snapshot.sparse_search(&expanded, config.sparse_k, &scope);
    let dense = snapshot
        .dense_search(&embedder.embed(&expanded.embedding_text()), &expanded, config.dense_k, &scope)
        .expect("dimensions match");
    println!("\nsparse top 3: {:?}", &sparse[..sparse.len().min(3)]);
    println!("dense top 3:  {:?}", &dense[..dense.len().min(3)]);

    let result = retriever.retrieve(&query, today, &scope).expect("retrieval runs");
    println!("\nfused:");
    for p in &result.passages {
        println!(
            "  #{} {:<14} rrf {:.5}  bm25 {:.3}  cos {:.3}",
            p.fused_rank, p.passage_id, p.fused_score, p.sparse_score, p.dense_score
        );
    }

    let block = build_evidence_template(&result.passages, 600).expect("ids are valid");
    println!("\nevidence block:\n{}", block.render());
}
