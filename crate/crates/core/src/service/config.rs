// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::recommender::RankParams;
use crate::retrieval::RetrievalConfig;
use crate::router::{OrchestratorConfig, RoutingPolicy};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_PREGEN_INTERVAL_SECS: u64 = 15 * 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommenderConfig {
    pub rank: RankParams,
    /// Trust budget used when a feed request does not name one.
    pub default_budget: usize,
    pub markov_smoothing: f64,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        Self {
            rank: RankParams::default(),
            default_budget: 2,
            markov_smoothing: 1.0,
        }
    }
}

/// Service configuration file (JSON). Relative paths resolve against the
/// directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub manifest: PathBuf,
    /// Require the full 20-component / 48-module catalog.
    #[serde(default)]
    pub strict_manifest: bool,
    pub corpus: PathBuf,
    pub users: PathBuf,
    #[serde(default)]
    pub ontology: Option<PathBuf>,
    #[serde(default)]
    pub guard_rules: Option<PathBuf>,
    /// Holds `audit.jsonl`, `events.jsonl`, `pregen.jsonl` and `arms.json`.
    pub state_dir: PathBuf,
    #[serde(default)]
    pub policy: RoutingPolicy,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub orchestrator: OrchestratorConfig,
    #[serde(default)]
    pub recommender: RecommenderConfig,
    #[serde(default = "default_interval")]
    pub pregen_interval_secs: u64,
}

fn default_listen() -> String {
    DEFAULT_LISTEN.into()
}

fn default_interval() -> u64 {
    DEFAULT_PREGEN_INTERVAL_SECS
}

impl ServiceConfig {
    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self, ServiceError> {
        let mut c: Self = serde_json::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        abs(&mut c.manifest);
        abs(&mut c.corpus);
        abs(&mut c.users);
        abs(&mut c.state_dir);
        c.ontology.as_mut().map(abs);
        c.guard_rules.as_mut().map(abs);
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks that every input file exists and creates the state directory.
    pub fn validate(&self) -> Result<(), ServiceError> {
        let inputs = [Some(&self.manifest), Some(&self.corpus), Some(&self.users), self.ontology.as_ref(), self.guard_rules.as_ref()];
        for p in inputs.into_iter().flatten() {
            if !p.is_file() {
                return Err(ServiceError::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.pregen_interval_secs == 0 {
            return Err(ServiceError::Config("pregen_interval_secs must be positive".into()));
        }
        std::fs::create_dir_all(&self.state_dir)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", self.state_dir.display())))
    }

    pub fn audit_path(&self) -> PathBuf {
        self.state_dir.join("audit.jsonl")
    }

    pub fn events_path(&self) -> PathBuf {
        self.state_dir.join("events.jsonl")
    }

    pub fn pregen_log_path(&self) -> PathBuf {
        self.state_dir.join("pregen.jsonl")
    }

    pub fn arms_path(&self) -> PathBuf {
        self.state_dir.join("arms.json")
    }
}
