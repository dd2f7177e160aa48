// SPDX-License-Identifier: Apache-2.0

//! Backend for a grounded, compliance-routed financial assistant.
//!
//! - [`registry`]: component/module manifests with derived PII sensitivity.
//! - [`router`]: deterministic model-path selection and the invocation pipeline.
//! - [`guard`]: input/output screening, fallback templates, F1 harness.
//! - [`retrieval`]: BM25 + dense hybrid retrieval with reciprocal-rank fusion.
//! - [`grounding`]: reference-token validation and the groundedness metric.
//! - [`recommender`]: rule, sequential and LinUCB layers over pre-generated insight cards.
//! - [`evalmetrics`]: routing score, Cohen's kappa, percentiles, replay evaluation.
//! - [`service`]: HTTP surface, persistence and the pre-generation scheduler.
//! - [`demo`]: the bundled demo dataset used by the examples.

pub mod clock;
pub mod demo;
pub mod evalmetrics;
pub mod grounding;
pub mod guard;
pub mod registry;
pub mod retrieval;
pub mod text;
pub mod jsonl;
pub mod recommender;
pub mod router;
pub mod service;
