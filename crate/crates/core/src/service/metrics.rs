// SPDX-License-Identifier: Apache-2.0

//! In-process counters and gauges, exposed as plain text on `GET /metrics`.
//! The line format is documented in `docs/metrics.md`.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Mutex;

use crate::evalmetrics::percentile;
use crate::router::AuditRecord;

#[derive(Debug, Default)]
struct Inner {
    requests: BTreeMap<&'static str, u64>,
    screened: u64,
    rejected: u64,
    latencies_ms: Vec<f64>,
    groundedness_sum: f64,
    groundedness_n: u64,
    pregen_cycles: u64,
    pregen_item_ms: Vec<f64>,
}

/// Chat gauges cover screened requests only: audit records that carry an
/// input guard verdict. Unknown-component requests are counted by path but
/// never reach the guard.
#[derive(Debug, Default)]
pub struct Metrics {
    inner: Mutex<Inner>,
}

pub const PATHS: [&str; 6] = ["/metrics", "/v1/chat", "/v1/feed", "/v1/feedback", "/v1/ingest", "/v1/pregen"];

#[derive(Debug, Clone, PartialEq)]
pub struct ChatGauges {
    pub screened: u64,
    pub rejected: u64,
    pub rejection_rate: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub groundedness_mean: f64,
}

/// Recomputes the chat gauges from audit records, as `/metrics` reports them.
pub fn chat_gauges<'a>(records: impl IntoIterator<Item = &'a AuditRecord>) -> ChatGauges {
    let m = Metrics::default();
    for r in records {
        m.observe_chat(r);
    }
    m.chat_gauges()
}

impl Metrics {
    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn count_request(&self, path: &'static str) {
        *self.lock().requests.entry(path).or_default() += 1;
    }

    pub fn request_count(&self, path: &str) -> u64 {
        self.lock().requests.get(path).copied().unwrap_or(0)
    }

    pub fn observe_chat(&self, record: &AuditRecord) {
        if record.guard_input_verdict.is_none() {
            return;
        }
        let mut g = self.lock();
        g.screened += 1;
        if record.guard_rejected() {
            g.rejected += 1;
        }
        g.latencies_ms.push(record.latency_ms as f64);
        if let Some(x) = record.groundedness {
            g.groundedness_sum += x;
            g.groundedness_n += 1;
        }
    }

    pub fn observe_pregen(&self, items: usize, elapsed_ms: f64) {
        let mut g = self.lock();
        g.pregen_cycles += 1;
        if items > 0 {
            g.pregen_item_ms.push(elapsed_ms / items as f64);
        }
    }

    pub fn chat_gauges(&self) -> ChatGauges {
        let g = self.lock();
        let q = |p| percentile(&g.latencies_ms, p).unwrap_or(0.0);
        ChatGauges {
            screened: g.screened,
            rejected: g.rejected,
            rejection_rate: if g.screened == 0 {
                0.0
            } else {
                g.rejected as f64 / g.screened as f64
            },
            p50_ms: q(50.0),
            p95_ms: q(95.0),
            groundedness_mean: if g.groundedness_n == 0 {
                0.0
            } else {
                g.groundedness_sum / g.groundedness_n as f64
            },
        }
    }

    pub fn render(&self, index_generation: u64, pulls: &BTreeMap<String, u64>) -> String {
        let c = self.chat_gauges();
        let g = self.lock();
        let mut out = String::new();
        for p in PATHS {
            let n = g.requests.get(p).copied().unwrap_or(0);
            let _ = writeln!(out, "groundpilot_requests_total{{path=\"{p}\"}} {n}");
        }
        let _ = writeln!(out, "groundpilot_chat_screened_total {}", c.screened);
        let _ = writeln!(out, "groundpilot_guard_rejections_total {}", c.rejected);
        let _ = writeln!(out, "groundpilot_guard_rejection_rate {}", c.rejection_rate);
        let _ = writeln!(out, "groundpilot_chat_latency_ms{{quantile=\"0.5\"}} {}", c.p50_ms);
        let _ = writeln!(out, "groundpilot_chat_latency_ms{{quantile=\"0.95\"}} {}", c.p95_ms);
        let _ = writeln!(out, "groundpilot_groundedness_mean {}", c.groundedness_mean);
        let pregen_mean = if g.pregen_item_ms.is_empty() {
            0.0
        } else {
            g.pregen_item_ms.iter().sum::<f64>() / g.pregen_item_ms.len() as f64
        };
        let _ = writeln!(out, "groundpilot_pregen_cycles_total {}", g.pregen_cycles);
        let _ = writeln!(out, "groundpilot_pregen_item_latency_ms_mean {pregen_mean}");
        let _ = writeln!(out, "groundpilot_index_generation {index_generation}");
        for (arm, n) in pulls {
            let _ = writeln!(out, "groundpilot_bandit_pulls{{arm=\"{arm}\"}} {n}");
        }
        out
    }
}

/// Parses `name{labels} value` lines into a map keyed by the text before the value.
pub fn parse_metrics(text: &str) -> BTreeMap<String, f64> {
    text.lines()
        .filter_map(|l| {
            let (k, v) = l.rsplit_once(' ')?;
            Some((k.to_string(), v.parse().ok()?))
        })
        .collect()
}
