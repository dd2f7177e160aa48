// SPDX-License-Identifier: Apache-2.0

//! Deterministic rule layer.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::insight::{InsightCard, UserProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleParams {
    pub w_own: f64,
    pub w_watch: f64,
    pub w_base: f64,
    pub read_multiplier: f64,
    /// Exponential decay rate per hour of card age.
    pub decay_per_hour: f64,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self {
            w_own: 2.0,
            w_watch: 1.5,
            w_base: 1.0,
            read_multiplier: 0.2,
            decay_per_hour: std::f64::consts::LN_2 / 24.0,
        }
    }
}

/// Age of a card in hours; clock skew clamps to zero.
pub fn age_hours(card: &InsightCard, now: DateTime<Utc>) -> f64 {
    ((now - card.created_at).num_milliseconds() as f64 / 3_600_000.0).max(0.0)
}

/// `affinity × read × exp(−λ·age)`, where affinity is `w_own` if any ticker is
/// owned, else `w_watch` if any is watched, else `w_base`; `read` is
/// `read_multiplier` for already-read cards except mandatory disclosures.
pub fn rule_score(card: &InsightCard, profile: &UserProfile, now: DateTime<Utc>, params: &RuleParams) -> f64 {
    let owned = card.tickers.iter().any(|t| profile.owned_tickers.contains(t));
    let watched = card.tickers.iter().any(|t| profile.watched_tickers.contains(t));
    let affinity = if owned {
        params.w_own
    } else if watched {
        params.w_watch
    } else {
        params.w_base
    };
    let read = if profile.has_read(&card.card_id) && !card.insight_type.is_mandatory_disclosure() {
        params.read_multiplier
    } else {
        1.0
    };
    affinity * read * (-params.decay_per_hour * age_hours(card, now)).exp()
}
