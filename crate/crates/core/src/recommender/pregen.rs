// SPDX-License-Identifier: Apache-2.0

//! Pre-generation of the per-user insight pool.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::insight::{InsightCard, InsightType, Requirement, UserProfile};
use crate::clock::Clock;
use crate::grounding;
use crate::registry::{ComponentCategory, ComponentSpec, Sensitivity};
use crate::retrieval::{build_evidence_template, HybridRetriever, SearchScope};
use crate::router::{GenerationAdapter, GenerationContext};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("retrieval failed: {0}")]
    Retrieval(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum PregenError {
    #[error("no builder registered for insight types {0:?}")]
    MissingBuilders(Vec<InsightType>),
}

/// A card body before ids and timestamps are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardDraft {
    pub tickers: Vec<String>,
    pub body: String,
    pub evidence_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildOutcome {
    Card(CardDraft),
    Skip(String),
}

pub trait CardBuilder: Send + Sync {
    fn insight_type(&self) -> InsightType;
    fn build(&self, user: &UserProfile, now: DateTime<Utc>) -> Result<BuildOutcome, BuildError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedType {
    pub insight_type: InsightType,
    pub reason: String,
    /// True when the builder errored rather than declined.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PregenOutput {
    pub user_id: String,
    pub cards: Vec<InsightCard>,
    pub skipped: Vec<SkippedType>,
}

/// Deterministic card id: `<user>.<type>.<yyyymmdd>`.
pub fn card_id(user_id: &str, t: InsightType, now: DateTime<Utc>) -> String {
    format!("{user_id}.{}.{}", t.as_str(), now.format("%Y%m%d"))
}

/// Runs one builder per catalog type. Declines and failures are recorded and
/// never abort the batch; drafts that fail grounding validation are dropped.
pub fn pregenerate(
    user: &UserProfile,
    builders: &[Arc<dyn CardBuilder>],
    clock: &dyn Clock,
) -> Result<PregenOutput, PregenError> {
    let by_type: BTreeMap<InsightType, &Arc<dyn CardBuilder>> =
        builders.iter().map(|b| (b.insight_type(), b)).collect();
    let missing: Vec<InsightType> = InsightType::ALL
        .iter()
        .copied()
        .filter(|t| !by_type.contains_key(t))
        .collect();
    if !missing.is_empty() {
        return Err(PregenError::MissingBuilders(missing));
    }

    let now = clock.now();
    let mut out = PregenOutput {
        user_id: user.user_id.clone(),
        cards: Vec::new(),
        skipped: Vec::new(),
    };
    for &t in InsightType::ALL {
        let skip = |reason: String, failed: bool| SkippedType {
            insight_type: t,
            reason,
            failed,
        };
        // a panicking builder is treated like an erroring one
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| by_type[&t].build(user, now)));
        match result {
            Ok(Ok(BuildOutcome::Card(draft))) => {
                let ids: BTreeSet<&str> = draft.evidence_ids.iter().map(String::as_str).collect();
                let report = grounding::validate(&draft.body, &ids);
                if !report.passed || draft.evidence_ids.is_empty() {
                    tracing::warn!(user = %user.user_id, insight_type = %t, "draft failed grounding");
                    out.skipped.push(skip("failed grounding validation".into(), false));
                    continue;
                }
                out.cards.push(InsightCard {
                    card_id: card_id(&user.user_id, t, now),
                    user_id: user.user_id.clone(),
                    insight_type: t,
                    tickers: draft.tickers,
                    created_at: now,
                    body: draft.body,
                    evidence_ids: draft.evidence_ids,
                });
            }
            Ok(Ok(BuildOutcome::Skip(reason))) => out.skipped.push(skip(reason, false)),
            Ok(Err(e)) => {
                tracing::warn!(user = %user.user_id, insight_type = %t, error = %e, "builder failed");
                out.skipped.push(skip(e.to_string(), true));
            }
            Err(_) => {
                tracing::warn!(user = %user.user_id, insight_type = %t, "builder panicked");
                out.skipped.push(skip("builder panicked".into(), true));
            }
        }
    }
    Ok(out)
}

/// Reference builder: retrieves evidence for the type's keywords plus the
/// user's relevant tickers and fills the internal template adapter.
pub struct TemplateCardBuilder {
    insight_type: InsightType,
    retriever: Arc<HybridRetriever>,
    adapter: Arc<dyn GenerationAdapter>,
    max_chars: usize,
    scope: SearchScope,
    component: ComponentSpec,
}

impl TemplateCardBuilder {
    pub fn new(insight_type: InsightType, retriever: Arc<HybridRetriever>, adapter: Arc<dyn GenerationAdapter>) -> Self {
        Self {
            insight_type,
            retriever,
            adapter,
            max_chars: 600,
            scope: SearchScope::all(),
            component: ComponentSpec {
                id: format!("pregen.{}", insight_type.as_str()),
                intent_label: insight_type.as_str().replace('_', " "),
                category: ComponentCategory::PersonalAsset,
                module_ids: Vec::new(),
                sensitivity: Sensitivity::Pii,
            },
        }
    }

    /// Restricts evidence to `scope`. Pools are per user, so shared builders
    /// should exclude modules that hold other users' records.
    pub fn with_scope(mut self, scope: SearchScope) -> Self {
        self.scope = scope;
        self
    }

    /// One builder per catalog type, sharing a retriever, adapter and scope.
    pub fn full_set(
        retriever: Arc<HybridRetriever>,
        adapter: Arc<dyn GenerationAdapter>,
        scope: SearchScope,
    ) -> Vec<Arc<dyn CardBuilder>> {
        InsightType::ALL
            .iter()
            .map(|&t| Arc::new(Self::new(t, retriever.clone(), adapter.clone()).with_scope(scope.clone())) as Arc<dyn CardBuilder>)
            .collect()
    }
}

impl CardBuilder for TemplateCardBuilder {
    fn insight_type(&self) -> InsightType {
        self.insight_type
    }

    fn build(&self, user: &UserProfile, now: DateTime<Utc>) -> Result<BuildOutcome, BuildError> {
        let tickers: Vec<String> = match self.insight_type.requirement() {
            Requirement::Nothing => Vec::new(),
            Requirement::Holdings if user.owned_tickers.is_empty() => {
                return Ok(BuildOutcome::Skip("user has no holdings".into()))
            }
            Requirement::Watchlist if user.watched_tickers.is_empty() => {
                return Ok(BuildOutcome::Skip("user has no watchlist".into()))
            }
            Requirement::Holdings => user.owned_tickers.iter().cloned().collect(),
            Requirement::Watchlist => user.watched_tickers.iter().cloned().collect(),
        };
        let mut query = self.insight_type.keywords().to_string();
        for t in &tickers {
            query.push(' ');
            query.push_str(t);
        }
        let found = self
            .retriever
            .retrieve(&query, now.date_naive(), &self.scope)
            .map_err(|e| BuildError::Retrieval(e.to_string()))?;
        if found.passages.is_empty() {
            return Ok(BuildOutcome::Skip("no supporting evidence".into()));
        }
        let block = build_evidence_template(&found.passages, self.max_chars)
            .map_err(|e| BuildError::Retrieval(e.to_string()))?;
        let body = self
            .adapter
            .generate(&GenerationContext {
                component: &self.component,
                query: &query,
                evidence: &block,
            })
            .map_err(|e| BuildError::Generation(e.to_string()))?;
        Ok(BuildOutcome::Card(CardDraft {
            tickers,
            body,
            evidence_ids: block.ref_ids().map(str::to_string).collect(),
        }))
    }
}
