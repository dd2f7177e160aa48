// SPDX-License-Identifier: Apache-2.0

//! Replay (rejection-sampling) evaluation of bandit policies on logs collected
//! under a uniform-random logging policy.
//!
//! Log format, JSON Lines: a header line, then one line per logged event.
//!
//! ```text
//! {"logging_policy":"uniform_random","arms":["arm0","arm1"],"dimension":3}
//! {"context":[0.1,0.2,0.3],"arm":"arm1","reward":1.0}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::recommender::sim::LinearEnvironment;
use crate::recommender::{bandit_select, ArmState};

pub const UNIFORM_LOGGING_POLICY: &str = "uniform_random";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayHeader {
    pub logging_policy: String,
    pub arms: Vec<String>,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEvent {
    pub context: Vec<f64>,
    pub arm: String,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayLog {
    pub header: ReplayHeader,
    pub events: Vec<ReplayEvent>,
}

impl ReplayLog {
    pub fn parse(jsonl: &str) -> Result<Self, MetricsError> {
        let mut lines = jsonl.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(MetricsError::EmptyLog)?;
        let header: ReplayHeader =
            serde_json::from_str(first).map_err(|source| MetricsError::Parse { line: 1, source })?;
        let events = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|source| MetricsError::Parse { line: i + 1, source }))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, events })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn mean_reward(&self) -> Option<f64> {
        (!self.events.is_empty()).then(|| self.events.iter().map(|e| e.reward).sum::<f64>() / self.events.len() as f64)
    }
}

pub trait ReplayPolicy {
    fn name(&self) -> String;
    fn choose(&mut self, context: &[f64], arms: &[String]) -> String;
    /// Called only for events where the choice matched the logged arm.
    fn observe(&mut self, context: &[f64], arm: &str, reward: f64);
}

/// Always plays one arm.
#[derive(Debug, Clone)]
pub struct FixedArm(pub String);

impl ReplayPolicy for FixedArm {
    fn name(&self) -> String {
        format!("fixed:{}", self.0)
    }
    fn choose(&mut self, _: &[f64], _: &[String]) -> String {
        self.0.clone()
    }
    fn observe(&mut self, _: &[f64], _: &str, _: f64) {}
}

#[derive(Debug, Clone)]
pub struct UniformRandom {
    rng: ChaCha8Rng,
}

impl UniformRandom {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl ReplayPolicy for UniformRandom {
    fn name(&self) -> String {
        "uniform".into()
    }
    fn choose(&mut self, _: &[f64], arms: &[String]) -> String {
        arms[self.rng.random_range(0..arms.len())].clone()
    }
    fn observe(&mut self, _: &[f64], _: &str, _: f64) {}
}

/// Disjoint LinUCB with every arm seeing the shared event context.
#[derive(Debug, Clone)]
pub struct LinUcbPolicy {
    pub arms: BTreeMap<String, ArmState>,
    pub alpha: f64,
}

impl LinUcbPolicy {
    pub fn new(arm_ids: &[String], dimension: usize, alpha: f64) -> Self {
        Self {
            arms: arm_ids.iter().map(|a| (a.clone(), ArmState::new(a.clone(), dimension))).collect(),
            alpha,
        }
    }
}

impl ReplayPolicy for LinUcbPolicy {
    fn name(&self) -> String {
        format!("linucb:{}", self.alpha)
    }
    fn choose(&mut self, context: &[f64], arms: &[String]) -> String {
        let contexts = arms.iter().map(|a| (a.clone(), context.to_vec())).collect();
        bandit_select(&contexts, &self.arms, self.alpha)
            .map(|s| s.arm_id)
            .unwrap_or_else(|_| arms[0].clone())
    }
    fn observe(&mut self, context: &[f64], arm: &str, reward: f64) {
        if let Some(a) = self.arms.get_mut(arm) {
            let _ = a.update(context, reward.clamp(0.0, 1.0));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub policy: String,
    pub events: usize,
    pub matched: usize,
    /// Mean reward over matched events; absent when nothing matched.
    pub estimate: Option<f64>,
    /// Standard error of the estimate (sample standard deviation / √matched).
    pub std_error: Option<f64>,
}

pub fn replay_evaluate(log: &ReplayLog, policy: &mut dyn ReplayPolicy) -> Result<ReplayReport, MetricsError> {
    if log.header.logging_policy != UNIFORM_LOGGING_POLICY {
        return Err(MetricsError::NonUniformLogging(log.header.logging_policy.clone()));
    }
    if log.events.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let mut rewards = Vec::new();
    for e in &log.events {
        if policy.choose(&e.context, &log.header.arms) == e.arm {
            rewards.push(e.reward);
            policy.observe(&e.context, &e.arm, e.reward);
        }
    }
    let m = rewards.len();
    let estimate = (m > 0).then(|| rewards.iter().sum::<f64>() / m as f64);
    let std_error = estimate.filter(|_| m > 1).map(|mean| {
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    });
    Ok(ReplayReport {
        policy: policy.name(),
        events: log.events.len(),
        matched: m,
        estimate,
        std_error,
    })
}

fn random_context(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Uniform-logged events where arm `i` pays Bernoulli(`arm_means[i]`)
/// independently of the context.
pub fn synthetic_log(arm_means: &[f64], events: usize, dimension: usize, seed: u64) -> ReplayLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arms: Vec<String> = (0..arm_means.len()).map(|i| format!("arm{i}")).collect();
    let events = (0..events)
        .map(|_| {
            let context = random_context(&mut rng, dimension);
            let a = rng.random_range(0..arms.len());
            let reward = f64::from(u8::from(rng.random::<f64>() < arm_means[a]));
            ReplayEvent {
                context,
                arm: arms[a].clone(),
                reward,
            }
        })
        .collect();
    ReplayLog {
        header: ReplayHeader {
            logging_policy: UNIFORM_LOGGING_POLICY.into(),
            arms,
            dimension,
        },
        events,
    }
}

/// Uniform-logged events from a linear environment with one context shared by
/// all arms.
pub fn synthetic_linear_log(env: &LinearEnvironment, events: usize, seed: u64) -> ReplayLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = env.thetas.len();
    let arms: Vec<String> = (0..k).map(|i| format!("arm{i}")).collect();
    let events = (0..events)
        .map(|_| {
            let mut context = random_context(&mut rng, env.dimension);
            let n = context.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            context.iter_mut().for_each(|x| *x /= n);
            let a = rng.random_range(0..k);
            let reward = f64::from(u8::from(rng.random::<f64>() < env.expected_reward(a, &context)));
            ReplayEvent {
                context,
                arm: arms[a].clone(),
                reward,
            }
        })
        .collect();
    ReplayLog {
        header: ReplayHeader {
            logging_policy: UNIFORM_LOGGING_POLICY.into(),
            arms,
            dimension: env.dimension,
        },
        events,
    }
}
