// SPDX-License-Identifier: Apache-2.0

//! Next-interest prediction over insight types.

use super::insight::{InsightType, INSIGHT_TYPE_COUNT};

/// Maps a reading sequence to a distribution over the 22 insight types,
/// indexed by [`InsightType::index`].
pub trait SequentialPredictor: Send + Sync {
    fn predict(&self, history: &[InsightType]) -> Vec<f64>;
}

/// Order-1 Markov chain with additive smoothing, estimated from the history itself:
/// `P(t | last) = (count(last→t) + α) / (count(last→·) + 22α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovPredictor {
    pub smoothing: f64,
}

impl Default for MarkovPredictor {
    fn default() -> Self {
        Self { smoothing: 1.0 }
    }
}

impl SequentialPredictor for MarkovPredictor {
    fn predict(&self, history: &[InsightType]) -> Vec<f64> {
        let n = INSIGHT_TYPE_COUNT as f64;
        let Some(&last) = history.last() else {
            return vec![1.0 / n; INSIGHT_TYPE_COUNT];
        };
        let mut counts = vec![0.0; INSIGHT_TYPE_COUNT];
        let mut total = 0.0;
        for w in history.windows(2) {
            if w[0] == last {
                counts[w[1].index()] += 1.0;
                total += 1.0;
            }
        }
        let den = total + n * self.smoothing;
        if den == 0.0 {
            return vec![1.0 / n; INSIGHT_TYPE_COUNT];
        }
        counts.into_iter().map(|c| (c + self.smoothing) / den).collect()
    }
}
