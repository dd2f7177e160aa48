// SPDX-License-Identifier: Apache-2.0

//! Component invocation and model-path routing.
//!
//! Path selection is a pure function of component sensitivity and policy:
//! PII components always run on the internal path. The invocation pipeline
//! runs in a fixed order (input guard, retrieval, generation, grounding
//! validation, output guard) and writes one audit record per call, whatever
//! the outcome.

mod adapter;
mod audit;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{
    sanitize_snippet, AdapterError, EgressRecord, EgressTranscript, GenerationAdapter, GenerationContext,
    TemplateAdapter,
};
pub use audit::{AuditRecord, AuditSink, JsonlAuditLog, MemoryAuditLog, Outcome};

use crate::clock::Clock;
use crate::grounding::{self, GroundingReport};
use crate::guard::{Direction, FallbackTemplates, Guard, GuardVerdict};
use crate::jsonl::JsonlError;
use crate::registry::{ComponentSpec, SharedManifest};
use crate::retrieval::{build_evidence_template, EvidenceBlock, HybridRetriever, SearchScope};

/// Returned when no passage supports an answer.
pub const NO_EVIDENCE_TEMPLATE: &str =
    "I could not find verified records to answer this right now. Please try rephrasing, or check the latest disclosures directly.";
/// Returned when retrieval or generation fails.
pub const UNAVAILABLE_TEMPLATE: &str =
    "This answer is temporarily unavailable. General information only; please try again shortly.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelPath {
    Internal,
    External,
}

impl std::fmt::Display for ModelPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelPath::Internal => "INTERNAL",
            ModelPath::External => "EXTERNAL",
        })
    }
}

/// Operator-controlled routing switches. `allow_external = false` forces all
/// traffic onto the internal path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingPolicy {
    pub allow_external: bool,
}

impl Default for RoutingPolicy {
    fn default() -> Self {
        Self { allow_external: true }
    }
}

pub fn select_path(component: &ComponentSpec, policy: &RoutingPolicy) -> ModelPath {
    if component.sensitivity.is_pii() || !policy.allow_external {
        ModelPath::Internal
    } else {
        ModelPath::External
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutedRequest {
    pub request_id: String,
    pub user_id: String,
    pub component_id: String,
    pub query_text: String,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub request_id: String,
    pub component_id: String,
    pub model_path: ModelPath,
    /// Generated text with reference tokens, or the fallback template.
    pub text: String,
    /// `text` with reference tokens removed.
    pub display_text: String,
    /// Absent for fallback responses.
    pub grounding: Option<GroundingReport>,
    pub evidence_ids: Vec<String>,
    pub fallback_used: bool,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub response: Response,
    pub audit: AuditRecord,
}

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("audit log write failed: {0}")]
    Audit(#[from] JsonlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    pub evidence_max_chars: usize,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            evidence_max_chars: 2000,
        }
    }
}

/// Everything `invoke` depends on.
pub struct Orchestrator {
    pub manifest: Arc<SharedManifest>,
    pub policy: RoutingPolicy,
    pub guard: Arc<dyn Guard>,
    pub retriever: Arc<HybridRetriever>,
    pub internal: Arc<dyn GenerationAdapter>,
    pub external: Arc<dyn GenerationAdapter>,
    pub audit: Arc<dyn AuditSink>,
    pub clock: Arc<dyn Clock>,
    pub fallbacks: FallbackTemplates,
    pub config: OrchestratorConfig,
}

impl std::fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Orchestrator")
            .field("policy", &self.policy)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

struct Trace {
    model_path: Option<ModelPath>,
    generation_executed: bool,
    input: Option<GuardVerdict>,
    output: Option<GuardVerdict>,
    evidence_ids: Vec<String>,
    index_generation: Option<u64>,
    grounding: Option<GroundingReport>,
}

impl Orchestrator {
    pub fn invoke(&self, request: &RoutedRequest) -> Result<Invocation, RouteError> {
        let started = Instant::now();
        let manifest = self.manifest.snapshot();
        let mut trace = Trace {
            model_path: None,
            generation_executed: false,
            input: None,
            output: None,
            evidence_ids: Vec::new(),
            index_generation: None,
            grounding: None,
        };

        let component = match manifest.get_component(&request.component_id) {
            Ok(c) => c,
            Err(_) => {
                self.write_audit(request, &trace, Outcome::UnknownComponent, true, started)?;
                return Err(RouteError::UnknownComponent(request.component_id.clone()));
            }
        };
        let path = select_path(component, &self.policy);
        trace.model_path = Some(path);

        let input = self.guard.screen(&request.query_text, Direction::Input);
        let input_blocked = input.is_block();
        trace.input = Some(input);
        if input_blocked {
            let text = self.guard_fallback(trace.input.as_ref().expect("set"));
            return self.finish(request, path, trace, Outcome::InputBlocked, text, started);
        }

        let retrieved = match self.retriever.retrieve(
            &request.query_text,
            request.received_at.date_naive(),
            &SearchScope::modules(component.module_ids.iter().cloned()).for_user(&request.user_id),
        ) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(request_id = %request.request_id, error = %e, "retrieval failed");
                return self.finish(request, path, trace, Outcome::RetrievalFailed, UNAVAILABLE_TEMPLATE.into(), started);
            }
        };
        trace.index_generation = Some(retrieved.generation);

        let mut passages = retrieved.passages;
        if path == ModelPath::External {
            let pii = manifest.pii_modules();
            passages.retain(|p| !pii.contains(p.source_module.as_str()));
        }
        if passages.is_empty() {
            return self.finish(request, path, trace, Outcome::NoEvidence, NO_EVIDENCE_TEMPLATE.into(), started);
        }
        let block: EvidenceBlock =
            build_evidence_template(&passages, self.config.evidence_max_chars).expect("passages non-empty");
        trace.evidence_ids = block.ref_ids().map(str::to_string).collect();

        let adapter = match path {
            ModelPath::Internal => &self.internal,
            ModelPath::External => &self.external,
        };
        trace.generation_executed = true;
        let generated = match adapter.generate(&GenerationContext {
            component,
            query: &request.query_text,
            evidence: &block,
        }) {
            Ok(t) => t,
            Err(e) => {
                tracing::warn!(request_id = %request.request_id, error = %e, "generation failed");
                return self.finish(request, path, trace, Outcome::AdapterFailed, UNAVAILABLE_TEMPLATE.into(), started);
            }
        };

        let ids: BTreeSet<&str> = trace.evidence_ids.iter().map(String::as_str).collect();
        let report = grounding::validate(&generated, &ids);

        let output = self.guard.screen(&grounding::strip_tokens(&generated), Direction::Output);
        if output.is_block() {
            let text = self.guard_fallback(&output);
            trace.output = Some(output);
            return self.finish(request, path, trace, Outcome::OutputBlocked, text, started);
        }
        trace.output = Some(output);
        trace.grounding = Some(report);
        self.finish(request, path, trace, Outcome::Answered, generated, started)
    }

    /// Writes the audit record for a request whose body did not parse.
    pub fn audit_malformed(&self, request_id: &str) -> Result<AuditRecord, RouteError> {
        let request = RoutedRequest {
            request_id: request_id.to_string(),
            user_id: String::new(),
            component_id: String::new(),
            query_text: String::new(),
            received_at: self.clock.now(),
        };
        let trace = Trace {
            model_path: None,
            generation_executed: false,
            input: None,
            output: None,
            evidence_ids: Vec::new(),
            index_generation: None,
            grounding: None,
        };
        self.write_audit(&request, &trace, Outcome::Malformed, true, Instant::now())
    }

    fn guard_fallback(&self, verdict: &GuardVerdict) -> String {
        self.fallbacks
            .fallback_for(verdict)
            .expect("called with a BLOCK verdict")
            .to_string()
    }

    fn finish(
        &self,
        request: &RoutedRequest,
        path: ModelPath,
        trace: Trace,
        outcome: Outcome,
        text: String,
        started: Instant,
    ) -> Result<Invocation, RouteError> {
        let fallback_used = outcome != Outcome::Answered;
        let audit = self.write_audit(request, &trace, outcome, fallback_used, started)?;
        let response = Response {
            request_id: request.request_id.clone(),
            component_id: request.component_id.clone(),
            model_path: path,
            display_text: grounding::strip_tokens(&text),
            text,
            grounding: trace.grounding,
            evidence_ids: trace.evidence_ids,
            fallback_used,
            outcome,
        };
        Ok(Invocation { response, audit })
    }

    fn write_audit(
        &self,
        request: &RoutedRequest,
        trace: &Trace,
        outcome: Outcome,
        fallback_used: bool,
        started: Instant,
    ) -> Result<AuditRecord, RouteError> {
        let record = AuditRecord {
            request_id: request.request_id.clone(),
            user_id: request.user_id.clone(),
            component_id: request.component_id.clone(),
            model_path: trace.model_path,
            generation_executed: trace.generation_executed,
            guard_input_verdict: trace.input.clone(),
            guard_output_verdict: trace.output.clone(),
            evidence_ids: trace.evidence_ids.clone(),
            index_generation: trace.index_generation,
            groundedness: trace.grounding.as_ref().map(|g| g.groundedness),
            grounding_passed: trace.grounding.as_ref().map(|g| g.passed),
            outcome,
            fallback_used,
            latency_ms: started.elapsed().as_millis() as u64,
            recorded_at: self.clock.now(),
        };
        self.audit.append(&record)?;
        Ok(record)
    }
}
