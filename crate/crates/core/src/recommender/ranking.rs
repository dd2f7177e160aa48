// SPDX-License-Identifier: Apache-2.0

//! Feed ranking: rule + sequential baseline, then a budget-limited bandit rerank.
//!
//! The bandit may move each card at most `budget` positions away from its
//! baseline position. Within that constraint the final order is filled slot by
//! slot, left to right: a card that would otherwise exceed its budget takes the
//! slot; otherwise the slot goes to the eligible card with the highest UCB
//! (ties to the better baseline position). This yields the lexicographically
//! largest UCB sequence among all orders that respect the budget.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::bandit::{ArmState, BanditError};
use super::insight::{InsightCard, UserProfile};
use super::rules::{age_hours, rule_score, RuleParams};
use super::sequential::SequentialPredictor;

/// Context features per card: rule score, sequential probability, recency,
/// owned flag, watched flag; standardized across the batch.
pub const CONTEXT_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankParams {
    pub rule: RuleParams,
    pub w_rule: f64,
    pub w_seq: f64,
    pub alpha_ucb: f64,
}

impl Default for RankParams {
    fn default() -> Self {
        Self {
            rule: RuleParams::default(),
            w_rule: 1.0,
            w_seq: 0.5,
            alpha_ucb: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCard {
    pub card_id: String,
    pub arm_id: String,
    pub rule_score: f64,
    pub seq_prob: f64,
    pub baseline_score: f64,
    pub ucb: f64,
    pub context: Vec<f64>,
    pub baseline_pos: usize,
    pub final_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTrace {
    pub user_id: String,
    pub budget: usize,
    pub baseline_order: Vec<String>,
    /// Unconstrained descending-UCB order.
    pub bandit_order: Vec<String>,
    pub final_order: Vec<String>,
    /// `final_pos − baseline_pos`, keyed by card id.
    pub displacements: BTreeMap<String, i64>,
    /// Per-card details in baseline order.
    pub cards: Vec<RankedCard>,
}

impl RankingTrace {
    pub fn max_displacement(&self) -> usize {
        self.displacements.values().map(|d| d.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn card(&self, card_id: &str) -> Option<&RankedCard> {
        self.cards.iter().find(|c| c.card_id == card_id)
    }
}

fn standardize(columns: &mut [Vec<f64>]) {
    for col in columns.iter_mut() {
        let n = col.len() as f64;
        if n == 0.0 {
            continue;
        }
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        for v in col.iter_mut() {
            *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
        }
    }
}

/// Order of baseline positions after the budgeted sweep. `keys[i]` is the UCB
/// of the card at baseline position `i`.
pub fn budgeted_order(ucb: &[f64], budget: usize) -> Vec<usize> {
    let n = ucb.len();
    let mut placed = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for slot in 0..n {
        let forced = slot.checked_sub(budget).filter(|&p| !placed[p]);
        let pick = forced.unwrap_or_else(|| {
            let hi = (slot + budget).min(n - 1);
            (0..=hi)
                .filter(|&p| !placed[p])
                .max_by(|&a, &b| ucb[a].total_cmp(&ucb[b]).then(b.cmp(&a)))
                .expect("an eligible card always remains")
        });
        placed[pick] = true;
        out.push(pick);
    }
    out
}

/// Ranks `cards` for `profile`. Cards whose type has no arm get a fresh arm's score.
pub fn rank_feed(
    cards: &[InsightCard],
    profile: &UserProfile,
    arms: &BTreeMap<String, ArmState>,
    predictor: &dyn SequentialPredictor,
    params: &RankParams,
    budget: usize,
    now: DateTime<Utc>,
) -> Result<RankingTrace, BanditError> {
    let seq = predictor.predict(&profile.reading_sequence());
    let mut rows: Vec<(usize, f64, f64, f64)> = cards
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = rule_score(c, profile, now, &params.rule);
            let s = seq[c.insight_type.index()];
            (i, r, s, params.w_rule * r + params.w_seq * s)
        })
        .collect();
    rows.sort_by(|a, b| {
        let (ca, cb) = (&cards[a.0], &cards[b.0]);
        b.3.total_cmp(&a.3)
            .then_with(|| cb.created_at.cmp(&ca.created_at))
            .then_with(|| ca.card_id.cmp(&cb.card_id))
    });

    let mut columns: Vec<Vec<f64>> = (0..CONTEXT_DIM).map(|_| Vec::with_capacity(rows.len())).collect();
    for &(i, r, s, _) in &rows {
        let c = &cards[i];
        columns[0].push(r);
        columns[1].push(s);
        columns[2].push((-params.rule.decay_per_hour * age_hours(c, now)).exp());
        columns[3].push(f64::from(u8::from(c.tickers.iter().any(|t| profile.owned_tickers.contains(t)))));
        columns[4].push(f64::from(u8::from(c.tickers.iter().any(|t| profile.watched_tickers.contains(t)))));
    }
    standardize(&mut columns);

    let mut ranked = Vec::with_capacity(rows.len());
    for (pos, &(i, r, s, base)) in rows.iter().enumerate() {
        let c = &cards[i];
        let arm_id = c.insight_type.as_str().to_string();
        let x: Vec<f64> = columns.iter().map(|col| col[pos]).collect();
        let ucb = match arms.get(&arm_id) {
            Some(a) => a.ucb(&x, params.alpha_ucb)?,
            None => ArmState::new(arm_id.clone(), CONTEXT_DIM).ucb(&x, params.alpha_ucb)?,
        };
        ranked.push(RankedCard {
            card_id: c.card_id.clone(),
            arm_id,
            rule_score: r,
            seq_prob: s,
            baseline_score: base,
            ucb,
            context: x,
            baseline_pos: pos,
            final_pos: pos,
        });
    }

    let ucbs: Vec<f64> = ranked.iter().map(|c| c.ucb).collect();
    let order = budgeted_order(&ucbs, budget);
    let preferred = budgeted_order(&ucbs, ranked.len());
    for (slot, &p) in order.iter().enumerate() {
        ranked[p].final_pos = slot;
    }
    let ids = |o: &[usize]| o.iter().map(|&p| ranked[p].card_id.clone()).collect::<Vec<_>>();
    Ok(RankingTrace {
        user_id: profile.user_id.clone(),
        budget,
        baseline_order: ranked.iter().map(|c| c.card_id.clone()).collect(),
        bandit_order: ids(&preferred),
        final_order: ids(&order),
        displacements: ranked
            .iter()
            .map(|c| (c.card_id.clone(), c.final_pos as i64 - c.baseline_pos as i64))
            .collect(),
        cards: ranked,
    })
}
