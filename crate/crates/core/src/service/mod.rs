// SPDX-License-Identifier: Apache-2.0

//! HTTP service: chat, feed and feedback endpoints, scheduled pre-generation,
//! file-based persistence and a plain-text metrics endpoint.
//!
//! [`AppState`] holds everything and exposes each endpoint as a plain method,
//! so the same operations run with or without the HTTP layer.
//!
//! Persistence lives in the configured state directory:
//!
//! | file           | contents                                            |
//! |----------------|-----------------------------------------------------|
//! | `audit.jsonl`  | one [`AuditRecord`](crate::router::AuditRecord) per chat request |
//! | `events.jsonl` | one [`FeedbackRecord`] per accepted feedback event  |
//! | `pregen.jsonl` | one [`PregenLogRecord`] per skipped card            |
//! | `arms.json`    | bandit arm snapshot, written on shutdown            |
//!
//! On startup the event log is replayed into user profiles and the
//! idempotency table; arm state comes from the snapshot.

mod config;
mod http;
mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{RecommenderConfig, ServiceConfig, DEFAULT_LISTEN, DEFAULT_PREGEN_INTERVAL_SECS};
pub use http::{router, serve, shutdown_signal};
pub use metrics::{chat_gauges, parse_metrics, ChatGauges, Metrics};

use crate::clock::{Clock, SystemClock};
use crate::grounding;
use crate::guard::{FallbackTemplates, RuleGuard};
use crate::jsonl::{self, AppendLog, JsonlError};
use crate::recommender::{
    insight_arm_store, pregenerate, rank_feed, shape_reward, ArmStore, BanditError, CardBuilder, FeedEvent,
    InsightCard, InsightType, MarkovPredictor, PregenOutput, RankingTrace, TemplateCardBuilder, UserProfile,
};
use crate::registry::{load_manifest, SharedManifest};
use crate::retrieval::{load_corpus, Document, HashingEmbedder, HybridIndex, HybridRetriever, Ontology, SearchScope};
use crate::router::{AuditSink, JsonlAuditLog, ModelPath, Orchestrator, RouteError, RoutedRequest, TemplateAdapter};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Log(#[from] JsonlError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error("{0}")]
    Runtime(String),
}

impl ServiceError {
    /// Process exit code: 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Error returned by an endpoint; maps to an HTTP status.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    pub user_id: String,
    pub component_id: String,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingSummary {
    pub groundedness: f64,
    pub passed: bool,
    pub sentences: usize,
    pub ungrounded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub request_id: String,
    pub component_id: String,
    pub model_path: ModelPath,
    pub display_text: String,
    pub grounding: Option<GroundingSummary>,
    pub evidence_ids: Vec<String>,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedItem {
    pub card_id: String,
    pub insight_type: InsightType,
    pub display_text: String,
    pub baseline_pos: usize,
    pub final_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedResponse {
    pub user_id: String,
    pub budget: usize,
    /// Identifies the stored ranking trace this order came from.
    pub trace_id: String,
    pub items: Vec<FeedItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub user_id: String,
    pub card_id: String,
    pub event: String,
    #[serde(default)]
    pub dwell_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackAck {
    /// 0-based line offset of the event in `events.jsonl`.
    pub offset: u64,
    pub reward: f64,
    /// True when the idempotency key had already been applied.
    pub duplicate: bool,
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub user_id: String,
    pub card_id: String,
    pub insight_type: InsightType,
    pub event: FeedEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_ms: Option<u64>,
    pub ts: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    pub reward: f64,
    /// Context vector the arm was updated with.
    pub context: Vec<f64>,
}

/// One line of `pregen.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PregenLogRecord {
    pub user_id: String,
    pub insight_type: InsightType,
    pub reason: String,
    pub failed: bool,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPregenReport {
    pub user_id: String,
    pub emitted: usize,
    pub skipped: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PregenCycleReport {
    pub users: Vec<UserPregenReport>,
}

impl PregenCycleReport {
    pub fn emitted(&self) -> usize {
        self.users.iter().map(|u| u.emitted).sum()
    }
}

struct StoredTrace {
    id: String,
    trace: RankingTrace,
}

/// Shared state behind every endpoint.
pub struct AppState {
    pub config: ServiceConfig,
    pub orchestrator: Arc<Orchestrator>,
    pub index: Arc<HybridIndex>,
    pub arms: Arc<ArmStore>,
    pub clock: Arc<dyn Clock>,
    pub metrics: Metrics,
    audit: Arc<JsonlAuditLog>,
    events: AppendLog<FeedbackRecord>,
    pregen_log: AppendLog<PregenLogRecord>,
    builders: RwLock<Vec<Arc<dyn CardBuilder>>>,
    users: RwLock<BTreeMap<String, UserProfile>>,
    pools: RwLock<BTreeMap<String, Vec<InsightCard>>>,
    traces: RwLock<BTreeMap<String, StoredTrace>>,
    idempotency: Mutex<HashMap<String, FeedbackAck>>,
    predictor: MarkovPredictor,
    request_seq: AtomicU64,
    trace_seq: AtomicU64,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState").field("config", &self.config).finish_non_exhaustive()
    }
}

fn read<T>(l: &RwLock<T>) -> std::sync::RwLockReadGuard<'_, T> {
    l.read().unwrap_or_else(|e| e.into_inner())
}

fn write<T>(l: &RwLock<T>) -> std::sync::RwLockWriteGuard<'_, T> {
    l.write().unwrap_or_else(|e| e.into_inner())
}

fn config_err(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Config(format!("{}: {e}", path.display()))
}

impl AppState {
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        Self::open_with_clock(config, Arc::new(SystemClock))
    }

    /// Loads inputs, indexes the corpus, restores persisted state. Does not
    /// run pre-generation.
    pub fn open_with_clock(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        config.validate()?;
        let manifest = load_manifest(&config.manifest, config.strict_manifest).map_err(|e| ServiceError::Config(e.to_string()))?;
        let docs = load_corpus(&config.corpus, Some(&manifest)).map_err(|e| config_err(&config.corpus, e))?;
        let ontology = match &config.ontology {
            Some(p) => Ontology::from_json_str(&std::fs::read_to_string(p).map_err(|e| config_err(p, e))?)
                .map_err(|e| config_err(p, e))?,
            None => Ontology::default(),
        };
        let guard = match &config.guard_rules {
            Some(p) => RuleGuard::from_file(p).map_err(|e| config_err(p, e))?,
            None => RuleGuard::default_rules(),
        };
        let users: Vec<UserProfile> = jsonl::read_all(&config.users).map_err(|e| ServiceError::Config(e.to_string()))?;

        let index = Arc::new(HybridIndex::new(Arc::new(HashingEmbedder::default())));
        index.refresh(docs).map_err(|e| config_err(&config.corpus, e))?;
        let retriever = Arc::new(HybridRetriever::new(index.clone(), ontology, config.retrieval));
        let audit = Arc::new(JsonlAuditLog::open(config.audit_path())?);
        let internal = Arc::new(TemplateAdapter::internal());
        let orchestrator = Arc::new(Orchestrator {
            manifest: Arc::new(SharedManifest::new(manifest)),
            policy: config.policy,
            guard: Arc::new(guard),
            retriever: retriever.clone(),
            internal: internal.clone(),
            external: Arc::new(TemplateAdapter::external()),
            audit: audit.clone(),
            clock: clock.clone(),
            fallbacks: FallbackTemplates::default(),
            config: config.orchestrator,
        });

        let arms = if config.arms_path().exists() {
            ArmStore::load(config.arms_path())?
        } else {
            insight_arm_store(config.recommender.rank.alpha_ucb)
        };

        let mut profiles: BTreeMap<String, UserProfile> = users.into_iter().map(|u| (u.user_id.clone(), u)).collect();
        let mut idempotency = HashMap::new();
        let events_path = config.events_path();
        if events_path.exists() {
            let past: Vec<FeedbackRecord> = jsonl::read_all(&events_path)?;
            for (offset, e) in past.into_iter().enumerate() {
                if let Some(p) = profiles.get_mut(&e.user_id) {
                    p.record_event(&e.card_id, e.insight_type, e.event, e.dwell_ms, e.ts);
                }
                if let Some(k) = e.idempotency_key {
                    idempotency.insert(
                        k,
                        FeedbackAck {
                            offset: offset as u64,
                            reward: e.reward,
                            duplicate: true,
                        },
                    );
                }
            }
        }

        let public_modules = SearchScope::modules(
            orchestrator
                .manifest
                .snapshot()
                .modules()
                .iter()
                .filter(|m| !m.sensitivity.is_pii())
                .map(|m| m.id.clone()),
        );
        let request_seq = audit.len();
        Ok(Self {
            builders: RwLock::new(TemplateCardBuilder::full_set(retriever, internal, public_modules)),
            predictor: MarkovPredictor {
                smoothing: config.recommender.markov_smoothing,
            },
            events: AppendLog::open(&events_path)?,
            pregen_log: AppendLog::open(config.pregen_log_path())?,
            config,
            orchestrator,
            index,
            arms: Arc::new(arms),
            clock,
            metrics: Metrics::default(),
            audit,
            users: RwLock::new(profiles),
            pools: RwLock::new(BTreeMap::new()),
            traces: RwLock::new(BTreeMap::new()),
            idempotency: Mutex::new(idempotency),
            request_seq: AtomicU64::new(request_seq),
            trace_seq: AtomicU64::new(0),
        })
    }

    /// Replaces the card builders used by pre-generation.
    pub fn set_builders(&self, builders: Vec<Arc<dyn CardBuilder>>) {
        *write(&self.builders) = builders;
    }

    pub fn user_ids(&self) -> Vec<String> {
        read(&self.users).keys().cloned().collect()
    }

    pub fn profile(&self, user_id: &str) -> Option<UserProfile> {
        read(&self.users).get(user_id).cloned()
    }

    pub fn pool(&self, user_id: &str) -> Vec<InsightCard> {
        read(&self.pools).get(user_id).cloned().unwrap_or_default()
    }

    /// Adds or replaces documents and publishes a new index generation.
    pub fn ingest(&self, docs: Vec<Document>) -> Result<u64, ApiError> {
        let manifest = self.orchestrator.manifest.snapshot();
        for d in &docs {
            if manifest.get_module(&d.source_module).is_err() {
                return Err(ApiError::BadRequest(format!("document `{}` cites unknown module `{}`", d.doc_id, d.source_module)));
            }
        }
        self.index
            .refresh(docs)
            .map(|g| g.generation())
            .map_err(|e| ApiError::BadRequest(e.to_string()))
    }

    fn next_request_id(&self) -> String {
        format!("req-{:010}", self.request_seq.fetch_add(1, Ordering::SeqCst))
    }

    /// Audits a chat body that failed to parse and returns the 400 to send.
    pub fn chat_malformed(&self, reason: String) -> ApiError {
        let id = self.next_request_id();
        match self.orchestrator.audit_malformed(&id) {
            Ok(_) => ApiError::BadRequest(reason),
            Err(e) => ApiError::Internal(e.to_string()),
        }
    }

    pub fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, ApiError> {
        let routed = RoutedRequest {
            request_id: self.next_request_id(),
            user_id: req.user_id.clone(),
            component_id: req.component_id.clone(),
            query_text: req.query.clone(),
            received_at: self.clock.now(),
        };
        match self.orchestrator.invoke(&routed) {
            Ok(inv) => {
                self.metrics.observe_chat(&inv.audit);
                let r = inv.response;
                Ok(ChatResponse {
                    request_id: r.request_id,
                    component_id: r.component_id,
                    model_path: r.model_path,
                    display_text: r.display_text,
                    grounding: r.grounding.map(|g| GroundingSummary {
                        groundedness: g.groundedness,
                        passed: g.passed,
                        sentences: g.total_sentences,
                        ungrounded: g.ungrounded_sentence_indices.len(),
                    }),
                    evidence_ids: r.evidence_ids,
                    fallback_used: r.fallback_used,
                })
            }
            Err(RouteError::UnknownComponent(c)) => Err(ApiError::NotFound(format!("unknown component `{c}`"))),
            Err(e) => Err(ApiError::Internal(e.to_string())),
        }
    }

    /// Ranks the user's current pool and stores the trace.
    pub fn feed(&self, user_id: &str, budget: Option<usize>) -> Result<FeedResponse, ApiError> {
        let profile = self
            .profile(user_id)
            .ok_or_else(|| ApiError::NotFound(format!("unknown user `{user_id}`")))?;
        let budget = budget.unwrap_or(self.config.recommender.default_budget);
        let pool = self.pool(user_id);
        let trace = rank_feed(
            &pool,
            &profile,
            &self.arms.snapshot(),
            &self.predictor,
            &self.config.recommender.rank,
            budget,
            self.clock.now(),
        )
        .map_err(|e| ApiError::Internal(e.to_string()))?;
        let by_id: BTreeMap<&str, &InsightCard> = pool.iter().map(|c| (c.card_id.as_str(), c)).collect();
        let items = trace
            .final_order
            .iter()
            .map(|id| {
                let card = by_id[id.as_str()];
                let rc = trace.card(id).expect("trace covers every card");
                FeedItem {
                    card_id: id.clone(),
                    insight_type: card.insight_type,
                    display_text: grounding::strip_tokens(&card.body),
                    baseline_pos: rc.baseline_pos,
                    final_pos: rc.final_pos,
                }
            })
            .collect();
        let trace_id = format!("{user_id}:{}", self.trace_seq.fetch_add(1, Ordering::SeqCst));
        write(&self.traces).insert(
            user_id.to_string(),
            StoredTrace {
                id: trace_id.clone(),
                trace,
            },
        );
        Ok(FeedResponse {
            user_id: user_id.to_string(),
            budget,
            trace_id,
            items,
        })
    }

    /// The most recent ranking trace served to `user_id`.
    pub fn last_trace(&self, user_id: &str) -> Option<(String, RankingTrace)> {
        read(&self.traces).get(user_id).map(|s| (s.id.clone(), s.trace.clone()))
    }

    /// Applies one feedback event. A repeated idempotency key returns the
    /// original acknowledgement without touching the log or the arms.
    pub fn feedback(&self, req: &FeedbackRequest, idempotency_key: Option<&str>) -> Result<FeedbackAck, ApiError> {
        let event: FeedEvent = req.event.parse().map_err(ApiError::BadRequest)?;
        // held for the whole event so concurrent duplicates apply once
        let mut seen = self.idempotency.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(ack) = idempotency_key.and_then(|k| seen.get(k)) {
            return Ok(FeedbackAck {
                duplicate: true,
                ..ack.clone()
            });
        }
        let card = self
            .pool(&req.user_id)
            .into_iter()
            .find(|c| c.card_id == req.card_id)
            .ok_or_else(|| ApiError::NotFound(format!("unknown card `{}` for user `{}`", req.card_id, req.user_id)))?;

        let context = self.context_for(&req.user_id, &card.card_id)?;
        let reward = shape_reward(event, req.dwell_ms);
        self.arms
            .update(card.insight_type.as_str(), &context, reward)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        let now = self.clock.now();
        let record = FeedbackRecord {
            user_id: req.user_id.clone(),
            card_id: card.card_id.clone(),
            insight_type: card.insight_type,
            event,
            dwell_ms: req.dwell_ms,
            ts: now,
            idempotency_key: idempotency_key.map(str::to_string),
            reward,
            context,
        };
        let offset = self.events.append(&record).map_err(|e| ApiError::Internal(e.to_string()))?;
        if let Some(p) = write(&self.users).get_mut(&req.user_id) {
            p.record(&card, event, req.dwell_ms, now);
        }
        let ack = FeedbackAck {
            offset,
            reward,
            duplicate: false,
        };
        if let Some(k) = idempotency_key {
            seen.insert(k.to_string(), ack.clone());
        }
        Ok(ack)
    }

    /// Context the card was shown with, from the user's last trace; ranks
    /// afresh when the card was never served.
    fn context_for(&self, user_id: &str, card_id: &str) -> Result<Vec<f64>, ApiError> {
        if let Some(c) = read(&self.traces).get(user_id).and_then(|s| s.trace.card(card_id).map(|c| c.context.clone())) {
            return Ok(c);
        }
        let profile = self.profile(user_id).ok_or_else(|| ApiError::NotFound(format!("unknown user `{user_id}`")))?;
        let trace = rank_feed(
            &self.pool(user_id),
            &profile,
            &self.arms.snapshot(),
            &self.predictor,
            &self.config.recommender.rank,
            0,
            self.clock.now(),
        )
        .map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(trace.card(card_id).expect("card is in the pool").context.clone())
    }

    /// Pre-generates one user's pool, replacing the previous one, and logs
    /// every skipped type.
    pub fn pregen_user(&self, user_id: &str) -> Result<PregenOutput, ApiError> {
        let user = self.profile(user_id).ok_or_else(|| ApiError::NotFound(format!("unknown user `{user_id}`")))?;
        let builders = read(&self.builders).clone();
        let out = pregenerate(&user, &builders, self.clock.as_ref()).map_err(|e| ApiError::Internal(e.to_string()))?;
        let now = self.clock.now();
        for s in &out.skipped {
            let rec = PregenLogRecord {
                user_id: user.user_id.clone(),
                insight_type: s.insight_type,
                reason: s.reason.clone(),
                failed: s.failed,
                at: now,
            };
            if let Err(e) = self.pregen_log.append(&rec) {
                tracing::error!(error = %e, "pregen log write failed");
            }
        }
        write(&self.pools).insert(user.user_id.clone(), out.cards.clone());
        Ok(out)
    }

    /// Pre-generates every user's pool. Failures stay within their user.
    pub fn run_pregen_cycle(&self) -> PregenCycleReport {
        let started = Instant::now();
        let mut report = PregenCycleReport { users: Vec::new() };
        for user_id in self.user_ids() {
            let entry = match self.pregen_user(&user_id) {
                Ok(out) => UserPregenReport {
                    user_id,
                    emitted: out.cards.len(),
                    skipped: out.skipped.iter().filter(|s| !s.failed).count(),
                    failed: out.skipped.iter().filter(|s| s.failed).count(),
                },
                Err(e) => {
                    tracing::error!(user = %user_id, error = %e, "pregen failed");
                    UserPregenReport {
                        user_id,
                        emitted: 0,
                        skipped: 0,
                        failed: InsightType::ALL.len(),
                    }
                }
            };
            report.users.push(entry);
        }
        self.metrics
            .observe_pregen(report.emitted(), started.elapsed().as_secs_f64() * 1000.0);
        report
    }

    pub fn metrics_text(&self) -> String {
        self.metrics.render(self.index.snapshot().generation(), &self.arms.pull_counts())
    }

    /// Flushes the logs and writes the arm snapshot.
    pub fn shutdown(&self) -> Result<(), ServiceError> {
        self.audit.flush()?;
        self.events.flush()?;
        self.pregen_log.flush()?;
        self.arms.save(self.config.arms_path())?;
        Ok(())
    }
}
