// SPDX-License-Identifier: Apache-2.0

//! Evaluation metrics: component routing score, rater agreement, latency
//! percentiles, rolling metric windows and offline replay of bandit policies.

mod replay;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use replay::{
    replay_evaluate, synthetic_linear_log, synthetic_log, FixedArm, LinUcbPolicy, ReplayEvent, ReplayHeader, ReplayLog, ReplayPolicy,
    ReplayReport, UniformRandom, UNIFORM_LOGGING_POLICY,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("routing case has an empty gold set")]
    EmptyGold,
    #[error("no routing cases")]
    EmptyBatch,
    #[error("no samples")]
    EmptySamples,
    #[error("percentile {0} outside (0, 100]")]
    BadPercentile(f64),
    #[error("negative or non-finite sample {0}")]
    BadSample(f64),
    #[error("no paired judgments")]
    NoPairs,
    #[error("response `{0}` does not have exactly two raters")]
    Unpaired(String),
    #[error("metric window is sealed")]
    Sealed,
    #[error("empty replay log")]
    EmptyLog,
    #[error("replay log was not produced by a uniform-random logger (header says `{0}`)")]
    NonUniformLogging(String),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labeled routing query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingCase {
    pub query: String,
    pub gold: BTreeSet<String>,
    pub predicted: BTreeSet<String>,
}

/// `α·|Cp∩Cg|/|Cg| + β·(1 − |Cp∖Cg|/|Cp|)`. With an empty prediction the
/// coverage term is 0 and the precision term is 1.
pub fn routing_score(case: &RoutingCase, alpha: f64, beta: f64) -> Result<f64, MetricsError> {
    if case.gold.is_empty() {
        return Err(MetricsError::EmptyGold);
    }
    let hits = case.predicted.intersection(&case.gold).count() as f64;
    let extra = case.predicted.difference(&case.gold).count() as f64;
    let coverage = hits / case.gold.len() as f64;
    let precision = if case.predicted.is_empty() {
        1.0
    } else {
        1.0 - extra / case.predicted.len() as f64
    };
    Ok(alpha * coverage + beta * precision)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingBatch {
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Reported alongside the mean because published headline figures are
    /// sometimes sums.
    pub sum: f64,
}

pub fn routing_score_batch(cases: &[RoutingCase], alpha: f64, beta: f64) -> Result<RoutingBatch, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let scores = cases
        .iter()
        .map(|c| routing_score(c, alpha, beta))
        .collect::<Result<Vec<_>, _>>()?;
    // summed in sorted order so the result does not depend on case order
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted.iter().sum();
    Ok(RoutingBatch {
        mean: sum / scores.len() as f64,
        sum,
        scores,
    })
}

pub fn parse_routing_cases(jsonl: &str) -> Result<Vec<RoutingCase>, MetricsError> {
    crate::jsonl::parse_lines(jsonl).map_err(|(line, source)| MetricsError::Parse { line, source })
}

pub fn load_routing_cases(path: impl AsRef<Path>) -> Result<Vec<RoutingCase>, MetricsError> {
    parse_routing_cases(&std::fs::read_to_string(path)?)
}

/// Cohen's kappa from a 2×2 table `[[yes/yes, yes/no], [no/yes, no/no]]`
/// (rows: rater 1, columns: rater 2). Computed from integer counts so
/// rational results come out correctly rounded.
pub fn kappa_from_table(table: [[u64; 2]; 2]) -> Result<f64, MetricsError> {
    let n: u64 = table.iter().flatten().sum();
    if n == 0 {
        return Err(MetricsError::NoPairs);
    }
    let agree = table[0][0] + table[1][1];
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let chance = u128::from(rows[0]) * u128::from(cols[0]) + u128::from(rows[1]) * u128::from(cols[1]);
    let nn = u128::from(n) * u128::from(n);
    if chance == nn {
        // both raters used a single label; agreement is then perfect
        return Ok(1.0);
    }
    let num = i128::try_from(u128::from(n) * u128::from(agree)).expect("fits") - chance as i128;
    Ok(num as f64 / (nn - chance) as f64)
}

/// Cohen's kappa over paired boolean judgments `(rater1, rater2)`.
pub fn cohens_kappa(pairs: &[(bool, bool)]) -> Result<f64, MetricsError> {
    let mut t = [[0u64; 2]; 2];
    for &(a, b) in pairs {
        t[usize::from(!a)][usize::from(!b)] += 1;
    }
    kappa_from_table(t)
}

/// One rater's judgment of one response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaReview {
    pub response_id: String,
    pub rater_id: String,
    pub factuality: bool,
    pub safety: bool,
    pub alignment: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaAxis {
    Factuality,
    Safety,
    Alignment,
}

impl QaAxis {
    pub const ALL: [QaAxis; 3] = [QaAxis::Factuality, QaAxis::Safety, QaAxis::Alignment];

    fn of(self, r: &QaReview) -> bool {
        match self {
            QaAxis::Factuality => r.factuality,
            QaAxis::Safety => r.safety,
            QaAxis::Alignment => r.alignment,
        }
    }
}

/// Pairs the two reviews of each response on one axis; raters are ordered by id.
pub fn pair_reviews(reviews: &[QaReview], axis: QaAxis) -> Result<Vec<(bool, bool)>, MetricsError> {
    let mut by_response: std::collections::BTreeMap<&str, Vec<&QaReview>> = Default::default();
    for r in reviews {
        by_response.entry(&r.response_id).or_default().push(r);
    }
    by_response
        .into_iter()
        .map(|(id, mut rs)| {
            if rs.len() != 2 || rs[0].rater_id == rs[1].rater_id {
                return Err(MetricsError::Unpaired(id.to_string()));
            }
            rs.sort_by(|a, b| a.rater_id.cmp(&b.rater_id));
            Ok((axis.of(rs[0]), axis.of(rs[1])))
        })
        .collect()
}

/// Pass rate per axis over all reviews, plus per-axis kappa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaSummary {
    pub responses: usize,
    pub pass_rate: Vec<(QaAxis, f64)>,
    pub kappa: Vec<(QaAxis, f64)>,
}

pub fn summarize_reviews(reviews: &[QaReview]) -> Result<QaSummary, MetricsError> {
    if reviews.is_empty() {
        return Err(MetricsError::NoPairs);
    }
    let mut pass_rate = Vec::new();
    let mut kappa = Vec::new();
    let mut responses = 0;
    for axis in QaAxis::ALL {
        let pairs = pair_reviews(reviews, axis)?;
        responses = pairs.len();
        let passes = reviews.iter().filter(|r| axis.of(r)).count();
        pass_rate.push((axis, passes as f64 / reviews.len() as f64));
        kappa.push((axis, cohens_kappa(&pairs)?));
    }
    Ok(QaSummary {
        responses,
        pass_rate,
        kappa,
    })
}

/// Nearest-rank percentile: the element at 1-based rank `⌈p·n/100⌉` of the
/// ascending sort.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(MetricsError::BadPercentile(p));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((p * n as f64) / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Append-only sample window for latency, guard verdicts and citation coverage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricWindow {
    latencies_ms: Vec<f64>,
    allowed: u64,
    blocked: u64,
    coverage: Vec<f64>,
    sealed: bool,
}

impl MetricWindow {
    pub fn new() -> Self {
        Self::default()
    }

    fn open(&self) -> Result<(), MetricsError> {
        if self.sealed {
            Err(MetricsError::Sealed)
        } else {
            Ok(())
        }
    }

    fn check(v: f64) -> Result<(), MetricsError> {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(MetricsError::BadSample(v))
        }
    }

    pub fn record_latency(&mut self, ms: f64) -> Result<(), MetricsError> {
        self.open()?;
        Self::check(ms)?;
        self.latencies_ms.push(ms);
        Ok(())
    }

    pub fn record_guard(&mut self, blocked: bool) -> Result<(), MetricsError> {
        self.open()?;
        if blocked {
            self.blocked += 1;
        } else {
            self.allowed += 1;
        }
        Ok(())
    }

    pub fn record_coverage(&mut self, fraction: f64) -> Result<(), MetricsError> {
        self.open()?;
        Self::check(fraction)?;
        self.coverage.push(fraction);
        Ok(())
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn latencies(&self) -> &[f64] {
        &self.latencies_ms
    }

    pub fn latency_percentile(&self, p: f64) -> Result<f64, MetricsError> {
        percentile(&self.latencies_ms, p)
    }

    pub fn guard_counts(&self) -> (u64, u64) {
        (self.allowed, self.blocked)
    }

    /// Blocked over total verdicts; 0 with no verdicts.
    pub fn rejection_rate(&self) -> f64 {
        let total = self.allowed + self.blocked;
        if total == 0 {
            0.0
        } else {
            self.blocked as f64 / total as f64
        }
    }

    pub fn coverage_mean(&self) -> Option<f64> {
        (!self.coverage.is_empty()).then(|| self.coverage.iter().sum::<f64>() / self.coverage.len() as f64)
    }
}
