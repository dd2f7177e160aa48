// SPDX-License-Identifier: Apache-2.0

//! Generation adapters.
//!
//! [`TemplateAdapter`] is the deterministic reference generator: each evidence
//! entry becomes one sentence built from a fixed frame, a sanitized snippet of
//! the entry, and the entry's reference token. Snippets have their internal
//! sentence boundaries neutralized so that every emitted sentence carries
//! exactly one token.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ModelPath;
use crate::grounding::{ref_token, strip_tokens};
use crate::registry::ComponentSpec;
use crate::retrieval::EvidenceBlock;
use crate::text::TERMINALS;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("generation backend unavailable: {0}")]
    Unavailable(String),
    #[error("generation failed: {0}")]
    Failed(String),
}

/// What a generator receives for one request.
#[derive(Debug, Clone, Copy)]
pub struct GenerationContext<'a> {
    pub component: &'a ComponentSpec,
    pub query: &'a str,
    pub evidence: &'a EvidenceBlock,
}

impl GenerationContext<'_> {
    /// The serialized prompt: everything a backend sees.
    pub fn prompt(&self) -> String {
        format!(
            "component: {}\nintent: {}\nquery: {}\nevidence:\n{}",
            self.component.id,
            self.component.intent_label,
            self.query,
            self.evidence.render()
        )
    }
}

pub trait GenerationAdapter: Send + Sync {
    fn path(&self) -> ModelPath;
    fn generate(&self, ctx: &GenerationContext<'_>) -> Result<String, AdapterError>;
}

/// Everything one external call carried out of the process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EgressRecord {
    pub component_id: String,
    pub evidence_ids: Vec<String>,
    /// Source module of each evidence entry, aligned with `evidence_ids`.
    pub evidence_modules: Vec<String>,
    pub prompt: String,
}

#[derive(Debug, Default)]
pub struct EgressTranscript {
    records: Mutex<Vec<EgressRecord>>,
}

impl EgressTranscript {
    pub fn records(&self) -> Vec<EgressRecord> {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, r: EgressRecord) {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).push(r);
    }
}

const FRAMES: &[&str] = &[
    "According to the latest record",
    "A related source notes",
    "Supporting data shows",
    "Further evidence indicates",
];

/// Deterministic template filler. The external variant records its egress.
#[derive(Debug)]
pub struct TemplateAdapter {
    path: ModelPath,
    transcript: Option<EgressTranscript>,
    calls: AtomicU64,
}

impl TemplateAdapter {
    pub fn internal() -> Self {
        Self {
            path: ModelPath::Internal,
            transcript: None,
            calls: AtomicU64::new(0),
        }
    }

    pub fn external() -> Self {
        Self {
            path: ModelPath::External,
            transcript: Some(EgressTranscript::default()),
            calls: AtomicU64::new(0),
        }
    }

    pub fn transcript(&self) -> Option<&EgressTranscript> {
        self.transcript.as_ref()
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Makes `text` safe to embed inside one sentence.
pub fn sanitize_snippet(text: &str) -> String {
    let flat: Vec<char> = strip_tokens(text)
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    let mut out = String::with_capacity(flat.len());
    for (i, &c) in flat.iter().enumerate() {
        let boundary = match flat.get(i + 1) {
            None => true,
            Some(&n) => n.is_whitespace() || n == '[' || TERMINALS.contains(&n),
        };
        if TERMINALS.contains(&c) && boundary {
            out.push(';');
        } else {
            out.push(c);
        }
    }
    out.trim_end_matches([';', ' ']).trim().to_string()
}

impl GenerationAdapter for TemplateAdapter {
    fn path(&self) -> ModelPath {
        self.path
    }

    fn generate(&self, ctx: &GenerationContext<'_>) -> Result<String, AdapterError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(t) = &self.transcript {
            t.push(EgressRecord {
                component_id: ctx.component.id.clone(),
                evidence_ids: ctx.evidence.ref_ids().map(str::to_string).collect(),
                evidence_modules: ctx.evidence.entries.iter().map(|e| e.source_module.clone()).collect(),
                prompt: ctx.prompt(),
            });
        }
        let sentences: Vec<String> = ctx
            .evidence
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let frame = FRAMES[i % FRAMES.len()];
                let snippet = sanitize_snippet(&e.text);
                if snippet.is_empty() {
                    format!("{frame} {}.", ref_token(&e.ref_id))
                } else {
                    format!("{frame}, {snippet} {}.", ref_token(&e.ref_id))
                }
            })
            .collect();
        Ok(sentences.join(" "))
    }
}
