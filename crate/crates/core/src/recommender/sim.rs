// SPDX-License-Identifier: Apache-2.0

//! Seeded simulations for the recommender's directional claims.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bandit::ArmState;
use super::insight::{FeedEvent, InsightCard, InsightType, UserProfile};
use super::ranking::{rank_feed, RankParams};
use super::sequential::MarkovPredictor;

fn unit_vector(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Linear-reward environment: arm `a` pays Bernoulli(0.5 + 0.4·θ_aᵀx_a)
/// with θ_a and every context drawn uniformly from the unit sphere.
#[derive(Debug, Clone)]
pub struct LinearEnvironment {
    pub thetas: Vec<Vec<f64>>,
    pub dimension: usize,
}

impl LinearEnvironment {
    pub fn new(arms: usize, dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            thetas: (0..arms).map(|_| unit_vector(&mut rng, dimension)).collect(),
            dimension,
        }
    }

    pub fn expected_reward(&self, arm: usize, x: &[f64]) -> f64 {
        0.5 + 0.4 * self.thetas[arm].iter().zip(x).map(|(t, x)| t * x).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditSimReport {
    pub rounds: usize,
    pub linucb_reward: f64,
    pub random_reward: f64,
}

impl BanditSimReport {
    pub fn lift(&self) -> f64 {
        self.linucb_reward / self.random_reward
    }
}

/// Runs LinUCB and a uniform-random policy over the same context and reward
/// draws and returns their cumulative rewards.
pub fn simulate_bandit(env: &LinearEnvironment, rounds: usize, alpha: f64, seed: u64) -> BanditSimReport {
    let k = env.thetas.len();
    let d = env.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arms: Vec<ArmState> = (0..k).map(|a| ArmState::new(format!("arm{a}"), d)).collect();
    let (mut lin, mut rnd) = (0.0, 0.0);
    for _ in 0..rounds {
        let contexts: Vec<Vec<f64>> = (0..k).map(|_| unit_vector(&mut rng, d)).collect();
        // one uniform draw per arm decides every policy's Bernoulli outcome
        let u: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let random_arm = rng.random_range(0..k);

        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (a, arm) in arms.iter().enumerate() {
            let p = arm.ucb(&contexts[a], alpha).expect("identity-initialized arms stay positive definite");
            if p > best_p {
                best = a;
                best_p = p;
            }
        }
        let pay = |a: usize| f64::from(u8::from(u[a] < env.expected_reward(a, &contexts[a])));
        let r = pay(best);
        arms[best].update(&contexts[best], r).expect("reward is 0 or 1");
        lin += r;
        rnd += pay(random_arm);
    }
    BanditSimReport {
        rounds,
        linucb_reward: lin,
        random_reward: rnd,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionConfig {
    pub sessions: usize,
    pub new_cards_per_session: usize,
    pub pool_size: usize,
    pub shown_per_session: usize,
    pub click_probability: f64,
    pub hours_between_sessions: i64,
}

impl Default for RepetitionConfig {
    fn default() -> Self {
        Self {
            sessions: 1_000,
            new_cards_per_session: 4,
            pool_size: 30,
            shown_per_session: 5,
            click_probability: 0.35,
            hours_between_sessions: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub impressions: usize,
    pub reshows: usize,
}

impl RepetitionReport {
    /// Fraction of impressions that showed an already-read card.
    pub fn reshow_fraction(&self) -> f64 {
        if self.impressions == 0 {
            0.0
        } else {
            self.reshows as f64 / self.impressions as f64
        }
    }
}

const SIM_TICKERS: [&str; 6] = ["005930", "000660", "035420", "051910", "068270", "207940"];

/// Replays hourly feed sessions for one user. Each session adds fresh cards,
/// ranks the rolling pool with `rank_feed` at budget 0, shows the top cards
/// and clicks each with a fixed probability. The card stream and click draws
/// depend only on `seed`, so runs that differ only in `params` are paired.
pub fn simulate_repetition(config: &RepetitionConfig, params: &RankParams, seed: u64) -> RepetitionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: DateTime<Utc> = Utc.with_ymd_and_hms(2025, 1, 6, 8, 0, 0).unwrap();
    let mut profile = UserProfile::new("sim").with_owned(["005930", "000660"]).with_watched(["035420"]);
    let predictor = MarkovPredictor::default();
    let arms = BTreeMap::new();
    let mut pool: Vec<InsightCard> = Vec::new();
    let mut report = RepetitionReport {
        impressions: 0,
        reshows: 0,
    };
    let mut next_id = 0usize;
    for s in 0..config.sessions {
        let now = start + Duration::hours(config.hours_between_sessions * s as i64);
        for _ in 0..config.new_cards_per_session {
            let t = InsightType::ALL[rng.random_range(0..InsightType::ALL.len())];
            let ticker = SIM_TICKERS[rng.random_range(0..SIM_TICKERS.len())];
            pool.push(InsightCard {
                card_id: format!("c{next_id:06}"),
                user_id: profile.user_id.clone(),
                insight_type: t,
                tickers: vec![ticker.to_string()],
                created_at: now,
                body: String::new(),
                evidence_ids: Vec::new(),
            });
            next_id += 1;
        }
        if pool.len() > config.pool_size {
            pool.drain(..pool.len() - config.pool_size);
        }
        let trace = rank_feed(&pool, &profile, &arms, &predictor, params, 0, now).expect("fresh arms never fail");
        let clicks: Vec<f64> = (0..config.shown_per_session).map(|_| rng.random()).collect();
        for (slot, id) in trace.final_order.iter().take(config.shown_per_session).enumerate() {
            let card = pool.iter().find(|c| &c.card_id == id).expect("ranked card is in the pool").clone();
            report.impressions += 1;
            if profile.has_read(id) {
                report.reshows += 1;
            }
            profile.record(&card, FeedEvent::Impression, None, now);
            if clicks[slot] < config.click_probability {
                profile.record(&card, FeedEvent::Click, None, now);
            }
        }
    }
    report
}
