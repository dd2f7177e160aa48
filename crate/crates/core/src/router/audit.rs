// SPDX-License-Identifier: Apache-2.0

//! Per-invocation audit records and append-only sinks.

use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ModelPath;
use crate::guard::GuardVerdict;
use crate::jsonl::{AppendLog, JsonlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Answered,
    InputBlocked,
    OutputBlocked,
    NoEvidence,
    RetrievalFailed,
    AdapterFailed,
    UnknownComponent,
    /// The request body did not parse; only the request id is known.
    Malformed,
}

/// One line of the audit log. Written for every invocation, including errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub request_id: String,
    pub user_id: String,
    pub component_id: String,
    /// Selected path; absent when the component did not resolve.
    pub model_path: Option<ModelPath>,
    pub generation_executed: bool,
    pub guard_input_verdict: Option<GuardVerdict>,
    pub guard_output_verdict: Option<GuardVerdict>,
    pub evidence_ids: Vec<String>,
    pub index_generation: Option<u64>,
    pub groundedness: Option<f64>,
    pub grounding_passed: Option<bool>,
    pub outcome: Outcome,
    pub fallback_used: bool,
    pub latency_ms: u64,
    pub recorded_at: DateTime<Utc>,
}

impl AuditRecord {
    /// Copy with the wall-clock fields zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            latency_ms: 0,
            recorded_at: DateTime::<Utc>::UNIX_EPOCH,
            ..self.clone()
        }
    }

    /// True when this request counts toward the guard rejection rate.
    pub fn guard_rejected(&self) -> bool {
        matches!(self.outcome, Outcome::InputBlocked | Outcome::OutputBlocked)
    }
}

pub trait AuditSink: Send + Sync {
    fn append(&self, record: &AuditRecord) -> Result<u64, JsonlError>;
    fn flush(&self) -> Result<(), JsonlError> {
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct MemoryAuditLog {
    records: Mutex<Vec<AuditRecord>>,
}

impl MemoryAuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl AuditSink for MemoryAuditLog {
    fn append(&self, record: &AuditRecord) -> Result<u64, JsonlError> {
        let mut g = self.records.lock().unwrap_or_else(|e| e.into_inner());
        g.push(record.clone());
        Ok(g.len() as u64 - 1)
    }
}

/// Audit log persisted as JSONL.
#[derive(Debug)]
pub struct JsonlAuditLog {
    log: AppendLog<AuditRecord>,
}

impl JsonlAuditLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, JsonlError> {
        Ok(Self {
            log: AppendLog::open(path)?,
        })
    }

    pub fn len(&self) -> u64 {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }
}

impl AuditSink for JsonlAuditLog {
    fn append(&self, record: &AuditRecord) -> Result<u64, JsonlError> {
        self.log.append(record)
    }

    fn flush(&self) -> Result<(), JsonlError> {
        self.log.flush()
    }
}
