// SPDX-License-Identifier: Apache-2.0

//! Input/output safety screening.
//!
//! [`Guard`] is the classifier slot. [`RuleGuard`] is the reference
//! implementation: an ordered list of regular-expression rules, each tagged
//! with a category and a direction. Patterns use the `regex` crate dialect and
//! are compiled case-insensitively.
//!
//! A BLOCK verdict maps to a fallback template through [`FallbackTemplates`],
//! choosing the highest-priority category present.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GuardError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rule file parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("rule `{id}` has an invalid pattern: {source}")]
    Pattern {
        id: String,
        #[source]
        source: regex::Error,
    },
    #[error("duplicate rule id `{0}`")]
    DuplicateRule(String),
    #[error("labeled sample on line {line} is invalid: {reason}")]
    Sample { line: usize, reason: String },
    #[error("cannot evaluate an empty sample set")]
    EmptySamples,
    #[error("fallback requested for an ALLOW verdict")]
    NotBlocked,
}

/// Guard categories, declared in fallback priority order (highest first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardCategory {
    PrivacyPii,
    PromptInjection,
    Toxicity,
    PolicyOther,
}

impl GuardCategory {
    pub const ALL: [GuardCategory; 4] = [
        GuardCategory::PrivacyPii,
        GuardCategory::PromptInjection,
        GuardCategory::Toxicity,
        GuardCategory::PolicyOther,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleDirection {
    Input,
    Output,
    Both,
}

impl RuleDirection {
    fn applies(self, d: Direction) -> bool {
        matches!(
            (self, d),
            (RuleDirection::Both, _)
                | (RuleDirection::Input, Direction::Input)
                | (RuleDirection::Output, Direction::Output)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Allow,
    Block,
}

/// Outcome of one screening pass. `decision` is BLOCK iff `categories` is non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardVerdict {
    pub decision: Decision,
    pub categories: BTreeSet<GuardCategory>,
    pub matched_rules: Vec<String>,
}

impl GuardVerdict {
    pub fn allow() -> Self {
        Self::from_matches(BTreeSet::new(), Vec::new())
    }

    pub fn from_matches(categories: BTreeSet<GuardCategory>, matched_rules: Vec<String>) -> Self {
        let decision = if categories.is_empty() {
            Decision::Allow
        } else {
            Decision::Block
        };
        Self {
            decision,
            categories,
            matched_rules,
        }
    }

    pub fn is_block(&self) -> bool {
        self.decision == Decision::Block
    }
}

/// A classifier that screens text in one direction.
pub trait Guard: Send + Sync {
    fn screen(&self, text: &str, direction: Direction) -> GuardVerdict;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuardRule {
    pub id: String,
    pub category: GuardCategory,
    pub pattern: String,
    pub direction: RuleDirection,
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleFile {
    rules: Vec<GuardRule>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    rule: GuardRule,
    regex: Regex,
}

/// Regex rule engine standing in for a learned guard model.
#[derive(Debug, Clone)]
pub struct RuleGuard {
    rules: Vec<CompiledRule>,
}

const DEFAULT_RULES: &str = include_str!("../data/guard_rules.json");

impl RuleGuard {
    pub fn new(rules: Vec<GuardRule>) -> Result<Self, GuardError> {
        let mut seen = BTreeSet::new();
        let mut compiled = Vec::with_capacity(rules.len());
        for rule in rules {
            if !seen.insert(rule.id.clone()) {
                return Err(GuardError::DuplicateRule(rule.id));
            }
            let regex = RegexBuilder::new(&rule.pattern)
                .case_insensitive(true)
                .build()
                .map_err(|source| GuardError::Pattern {
                    id: rule.id.clone(),
                    source,
                })?;
            compiled.push(CompiledRule { rule, regex });
        }
        Ok(Self { rules: compiled })
    }

    pub fn from_json_str(text: &str) -> Result<Self, GuardError> {
        let file: RuleFile = serde_json::from_str(text)?;
        Self::new(file.rules)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GuardError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GuardError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// The compiled-in rule set.
    pub fn default_rules() -> Self {
        Self::from_json_str(DEFAULT_RULES).expect("bundled guard rules are valid")
    }

    pub fn rules(&self) -> impl Iterator<Item = &GuardRule> {
        self.rules.iter().map(|c| &c.rule)
    }
}

impl Guard for RuleGuard {
    fn screen(&self, text: &str, direction: Direction) -> GuardVerdict {
        let mut categories = BTreeSet::new();
        let mut matched = Vec::new();
        for c in &self.rules {
            if c.rule.direction.applies(direction) && c.regex.is_match(text) {
                categories.insert(c.rule.category);
                matched.push(c.rule.id.clone());
            }
        }
        GuardVerdict::from_matches(categories, matched)
    }
}

/// A benchmark item: `gold_positive` means the text should be blocked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub text: String,
    pub gold_positive: bool,
}

/// Parses a JSONL benchmark file (`{"text": ..., "gold_positive": ...}` per line).
pub fn parse_samples(jsonl: &str) -> Result<Vec<LabeledSample>, GuardError> {
    let mut out = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: LabeledSample = serde_json::from_str(line).map_err(|e| GuardError::Sample {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if s.text.is_empty() {
            return Err(GuardError::Sample {
                line: i + 1,
                reason: "empty text".into(),
            });
        }
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl F1Report {
    /// Precision/recall/F1 with explicit zero-denominator conventions: a ratio
    /// with an empty denominator is 1.0 when there was nothing to find at all
    /// (TP+FP == 0 and TP+FN == 0), otherwise 0.0.
    pub fn from_confusion(confusion: Confusion) -> Self {
        let Confusion { tp, fp, fn_, .. } = confusion;
        let nothing_to_find = tp + fp == 0 && tp + fn_ == 0;
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                if nothing_to_find {
                    1.0
                } else {
                    0.0
                }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            confusion,
        }
    }
}

/// Screens every sample and scores BLOCK-as-positive against the gold labels.
pub fn evaluate_f1(
    guard: &dyn Guard,
    samples: &[LabeledSample],
    direction: Direction,
) -> Result<F1Report, GuardError> {
    if samples.is_empty() {
        return Err(GuardError::EmptySamples);
    }
    let mut c = Confusion::default();
    for s in samples {
        match (guard.screen(&s.text, direction).is_block(), s.gold_positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(F1Report::from_confusion(c))
}

/// Category-keyed safe templates returned in place of blocked content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackTemplates {
    templates: BTreeMap<GuardCategory, String>,
}

impl Default for FallbackTemplates {
    fn default() -> Self {
        let templates = [
            (
                GuardCategory::PrivacyPii,
                "For your privacy, personal identifiers such as resident registration, card or account numbers cannot be processed here. Please remove them and ask again.",
            ),
            (
                GuardCategory::PromptInjection,
                "This request cannot be processed. I can help with market data, disclosures and your portfolio within the service guidelines.",
            ),
            (
                GuardCategory::Toxicity,
                "Let's keep the conversation respectful. I'm happy to help with market and portfolio questions.",
            ),
            (
                GuardCategory::PolicyOther,
                "This service provides general information only and does not offer investment advice or guarantees of return. Past performance does not predict future results.",
            ),
        ];
        Self {
            templates: templates
                .into_iter()
                .map(|(k, v)| (k, v.to_string()))
                .collect(),
        }
    }
}

impl FallbackTemplates {
    pub fn with_template(mut self, category: GuardCategory, text: impl Into<String>) -> Self {
        self.templates.insert(category, text.into());
        self
    }

    /// Template for the highest-priority category in a BLOCK verdict.
    pub fn fallback_for(&self, verdict: &GuardVerdict) -> Result<&str, GuardError> {
        if !verdict.is_block() {
            return Err(GuardError::NotBlocked);
        }
        // BTreeSet iterates in declaration (= priority) order.
        let top = verdict.categories.iter().next().ok_or(GuardError::NotBlocked)?;
        Ok(self
            .templates
            .get(top)
            .map(String::as_str)
            .unwrap_or_else(|| self.templates[&GuardCategory::PolicyOther].as_str()))
    }

    pub fn get(&self, category: GuardCategory) -> Option<&str> {
        self.templates.get(&category).map(String::as_str)
    }
}
