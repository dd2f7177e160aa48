// SPDX-License-Identifier: Apache-2.0

//! Reciprocal-rank fusion of the sparse and dense result lists.

use std::collections::HashMap;

pub const DEFAULT_RRF_K: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FusedHit {
    pub id: String,
    /// Raw score from the sparse list, 0 when absent.
    pub sparse_score: f64,
    /// Raw cosine from the dense list, 0 when absent.
    pub dense_score: f64,
    pub fused_score: f64,
    /// 1-based, contiguous.
    pub fused_rank: usize,
}

/// `fused(d) = Σ 1 / (rrf_k + rank(d))` over the lists containing `d`, ranks
/// 1-based. Sorted by descending fused score, then ascending id, and cut to `k`.
pub fn fuse(sparse: &[(String, f64)], dense: &[(String, f64)], k: usize, rrf_k: f64) -> Vec<FusedHit> {
    let mut acc: HashMap<&str, (f64, f64, f64)> = HashMap::new();
    for (rank, (id, s)) in sparse.iter().enumerate() {
        let e = acc.entry(id).or_default();
        e.0 += 1.0 / (rrf_k + (rank + 1) as f64);
        e.1 = *s;
    }
    for (rank, (id, s)) in dense.iter().enumerate() {
        let e = acc.entry(id).or_default();
        e.0 += 1.0 / (rrf_k + (rank + 1) as f64);
        e.2 = *s;
    }
    let mut hits: Vec<FusedHit> = acc
        .into_iter()
        .map(|(id, (fused, sp, de))| FusedHit {
            id: id.to_string(),
            sparse_score: sp,
            dense_score: de,
            fused_score: fused,
            fused_rank: 0,
        })
        .collect();
    hits.sort_by(|a, b| b.fused_score.total_cmp(&a.fused_score).then_with(|| a.id.cmp(&b.id)));
    hits.truncate(k);
    for (i, h) in hits.iter_mut().enumerate() {
        h.fused_rank = i + 1;
    }
    hits
}
