// SPDX-License-Identifier: Apache-2.0

//! Disjoint LinUCB.
//!
//! Each arm keeps `A = I + Σ x xᵀ` and `b = Σ r x`. For a context `x` the arm
//! scores `θᵀx + α·sqrt(xᵀA⁻¹x)` with `θ = A⁻¹b`. Since `A` is symmetric,
//! `θᵀx = bᵀ(A⁻¹x)`, so one Cholesky solve per arm gives both terms.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::insight::FeedEvent;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("context has dimension {found}, arm `{arm}` expects {expected}")]
    DimensionMismatch { arm: String, expected: usize, found: usize },
    #[error("context for arm `{0}` has a non-finite entry")]
    NonFinite(String),
    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),
    #[error("unknown arm `{0}`")]
    UnknownArm(String),
    #[error("no arms to select from")]
    NoArms,
    #[error("arm `{0}` design matrix lost positive definiteness")]
    NotPositiveDefinite(String),
    #[error("snapshot {path}: {reason}")]
    Snapshot { path: String, reason: String },
}

/// Sufficient statistics of one arm. `a` is row-major `d×d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub arm_id: String,
    pub dimension: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub pull_count: u64,
}

impl ArmState {
    pub fn new(arm_id: impl Into<String>, dimension: usize) -> Self {
        let mut a = vec![0.0; dimension * dimension];
        for i in 0..dimension {
            a[i * dimension + i] = 1.0;
        }
        Self {
            arm_id: arm_id.into(),
            dimension,
            a,
            b: vec![0.0; dimension],
            pull_count: 0,
        }
    }

    fn check(&self, x: &[f64]) -> Result<(), BanditError> {
        if x.len() != self.dimension {
            return Err(BanditError::DimensionMismatch {
                arm: self.arm_id.clone(),
                expected: self.dimension,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BanditError::NonFinite(self.arm_id.clone()));
        }
        Ok(())
    }

    /// Lower-triangular Cholesky factor of `A`, row-major.
    fn cholesky(&self) -> Result<Vec<f64>, BanditError> {
        let d = self.dimension;
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.a[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(BanditError::NotPositiveDefinite(self.arm_id.clone()));
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Ok(l)
    }

    /// `A⁻¹ v`.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>, BanditError> {
        self.check(v)?;
        let d = self.dimension;
        let l = self.cholesky()?;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = v[i];
            for k in 0..i {
                s -= l[i * d + k] * y[k];
            }
            y[i] = s / l[i * d + i];
        }
        let mut z = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..d {
                s -= l[k * d + i] * z[k];
            }
            z[i] = s / l[i * d + i];
        }
        Ok(z)
    }

    pub fn theta(&self) -> Result<Vec<f64>, BanditError> {
        self.solve(&self.b)
    }

    pub fn ucb(&self, x: &[f64], alpha: f64) -> Result<f64, BanditError> {
        let z = self.solve(x)?;
        let mean: f64 = self.b.iter().zip(&z).map(|(b, z)| b * z).sum();
        let var: f64 = x.iter().zip(&z).map(|(x, z)| x * z).sum();
        Ok(mean + alpha * var.max(0.0).sqrt())
    }

    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<(), BanditError> {
        self.check(x)?;
        if !(0.0..=1.0).contains(&reward) {
            return Err(BanditError::RewardOutOfRange(reward));
        }
        let d = self.dimension;
        for i in 0..d {
            for j in 0..d {
                self.a[i * d + j] += x[i] * x[j];
            }
            self.b[i] += reward * x[i];
        }
        self.pull_count += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub arm_id: String,
    pub scores: BTreeMap<String, f64>,
}

/// Scores every arm that has a context and returns the argmax; ties go to
/// the smallest arm id.
pub fn bandit_select(
    contexts: &BTreeMap<String, Vec<f64>>,
    arms: &BTreeMap<String, ArmState>,
    alpha: f64,
) -> Result<Selection, BanditError> {
    let mut scores = BTreeMap::new();
    let mut best: Option<(&str, f64)> = None;
    for (id, x) in contexts {
        let arm = arms.get(id).ok_or_else(|| BanditError::UnknownArm(id.clone()))?;
        let p = arm.ucb(x, alpha)?;
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((id, p));
        }
        scores.insert(id.clone(), p);
    }
    let (arm_id, _) = best.ok_or(BanditError::NoArms)?;
    Ok(Selection {
        arm_id: arm_id.to_string(),
        scores,
    })
}

/// Full dwell credit at this many milliseconds.
pub const DWELL_SATURATION_MS: f64 = 30_000.0;

/// Reward for one feed event: the click indicator, blended half-and-half with
/// saturated dwell time when dwell is known. Clicks and dwells both count as a
/// click; impressions earn nothing.
pub fn shape_reward(event: FeedEvent, dwell_ms: Option<u64>) -> f64 {
    let click = if event == FeedEvent::Impression { 0.0 } else { 1.0 };
    match dwell_ms {
        Some(ms) if event != FeedEvent::Impression => 0.5 * click + 0.5 * (ms as f64 / DWELL_SATURATION_MS).min(1.0),
        _ => click,
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// On-disk arm state. See `docs/arm-snapshot.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSnapshot {
    pub version: u32,
    pub dimension: usize,
    pub alpha: f64,
    pub arms: Vec<ArmState>,
}

/// Shared arm table with one lock per arm.
#[derive(Debug)]
pub struct ArmStore {
    dimension: usize,
    alpha: f64,
    arms: BTreeMap<String, Mutex<ArmState>>,
}

impl ArmStore {
    pub fn new<I, S>(arm_ids: I, dimension: usize, alpha: f64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let arms = arm_ids
            .into_iter()
            .map(|id| {
                let id = id.into();
                (id.clone(), Mutex::new(ArmState::new(id, dimension)))
            })
            .collect();
        Self { dimension, alpha, arms }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn update(&self, arm_id: &str, x: &[f64], reward: f64) -> Result<(), BanditError> {
        let arm = self.arms.get(arm_id).ok_or_else(|| BanditError::UnknownArm(arm_id.to_string()))?;
        arm.lock().unwrap_or_else(|e| e.into_inner()).update(x, reward)
    }

    /// Copy of every arm, each read under its own lock.
    pub fn snapshot(&self) -> BTreeMap<String, ArmState> {
        self.arms
            .iter()
            .map(|(id, m)| (id.clone(), m.lock().unwrap_or_else(|e| e.into_inner()).clone()))
            .collect()
    }

    pub fn pull_counts(&self) -> BTreeMap<String, u64> {
        self.arms
            .iter()
            .map(|(id, m)| (id.clone(), m.lock().unwrap_or_else(|e| e.into_inner()).pull_count))
            .collect()
    }

    pub fn to_snapshot(&self) -> ArmSnapshot {
        ArmSnapshot {
            version: SNAPSHOT_VERSION,
            dimension: self.dimension,
            alpha: self.alpha,
            arms: self.snapshot().into_values().collect(),
        }
    }

    pub fn from_snapshot(s: ArmSnapshot) -> Result<Self, String> {
        if s.version != SNAPSHOT_VERSION {
            return Err(format!("unsupported snapshot version {}", s.version));
        }
        let mut arms = BTreeMap::new();
        for a in s.arms {
            if a.dimension != s.dimension || a.a.len() != s.dimension * s.dimension || a.b.len() != s.dimension {
                return Err(format!("arm `{}` has inconsistent dimensions", a.arm_id));
            }
            arms.insert(a.arm_id.clone(), Mutex::new(a));
        }
        Ok(Self {
            dimension: s.dimension,
            alpha: s.alpha,
            arms,
        })
    }

    /// Writes the snapshot atomically (temp file + rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BanditError> {
        let path = path.as_ref();
        let err = |reason: String| BanditError::Snapshot {
            path: path.display().to_string(),
            reason,
        };
        let json = serde_json::to_vec_pretty(&self.to_snapshot()).map_err(|e| err(e.to_string()))?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, json).map_err(|e| err(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BanditError> {
        let path = path.as_ref();
        let err = |reason: String| BanditError::Snapshot {
            path: path.display().to_string(),
            reason,
        };
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        let snap: ArmSnapshot = serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))?;
        Self::from_snapshot(snap).map_err(err)
    }
}
