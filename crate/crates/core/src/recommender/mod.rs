// SPDX-License-Identifier: Apache-2.0

//! Three-layer feed recommender over pre-generated insight cards.
//!
//! The rule layer scores ticker affinity, read status and freshness; the
//! sequential layer predicts the next insight type from the reading history;
//! the LinUCB layer reranks within a displacement budget and learns from
//! click and dwell feedback.

mod bandit;
mod insight;
mod pregen;
mod ranking;
mod rules;
mod sequential;
pub mod sim;

pub use bandit::{
    bandit_select, shape_reward, ArmSnapshot, ArmState, ArmStore, BanditError, Selection, DWELL_SATURATION_MS,
    SNAPSHOT_VERSION,
};
pub use insight::{
    FeedEvent, InsightCard, InsightType, Interaction, Requirement, UnknownInsightType, UserProfile,
    INSIGHT_TYPE_COUNT,
};
pub use pregen::{
    card_id, pregenerate, BuildError, BuildOutcome, CardBuilder, CardDraft, PregenError, PregenOutput, SkippedType,
    TemplateCardBuilder,
};
pub use ranking::{budgeted_order, rank_feed, RankParams, RankedCard, RankingTrace, CONTEXT_DIM};
pub use rules::{age_hours, rule_score, RuleParams};
pub use sequential::{MarkovPredictor, SequentialPredictor};

/// An arm table with one arm per insight type.
pub fn insight_arm_store(alpha: f64) -> ArmStore {
    ArmStore::new(InsightType::ALL.iter().map(|t| t.as_str()), CONTEXT_DIM, alpha)
}
