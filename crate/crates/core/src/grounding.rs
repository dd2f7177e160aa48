// SPDX-License-Identifier: Apache-2.0

//! Post-generation citation checks.
//!
//! A reference token is `[ref:` followed by one or more of `[A-Za-z0-9._-]`
//! and a closing `]`. Text is segmented with [`crate::text::split_sentences`];
//! reference tokens that open a segment belong to the sentence before it, so
//! both `Up 3% [ref:a].` and `Up 3%. [ref:a]` cite `a` from the same sentence.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::text::split_sentences;

static REF_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[ref:([A-Za-z0-9._-]+)\]").expect("valid"));
static LEADING_TOKENS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\s*\[ref:[A-Za-z0-9._-]+\])+").expect("valid"));
static TOKEN_RUN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[ \t]*\[ref:[A-Za-z0-9._-]+\](?:[ \t]*\[ref:[A-Za-z0-9._-]+\])*[ \t]*").expect("valid")
});

/// Formats a reference token for `id`.
pub fn ref_token(id: &str) -> String {
    format!("[ref:{id}]")
}

/// True when `id` is a valid reference-token id.
pub fn is_valid_ref_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

/// Every reference id in `text`, in order of appearance.
pub fn extract_refs(text: &str) -> Vec<&str> {
    REF_TOKEN
        .captures_iter(text)
        .map(|c| c.get(1).expect("group").as_str())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub total_sentences: usize,
    pub grounded_sentences: usize,
    pub groundedness: f64,
    pub unresolved_tokens: Vec<String>,
    pub ungrounded_sentence_indices: Vec<usize>,
    pub passed: bool,
}

/// Segments `text` into sentences with citation tokens attached to the
/// sentence they follow. Token-only text yields no sentences.
pub fn segment(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut pending_prefix = String::new();
    for seg in split_sentences(text) {
        let (lead, rest) = match LEADING_TOKENS.find(seg) {
            Some(m) => (m.as_str().trim(), seg[m.end()..].trim()),
            None => ("", seg),
        };
        if !lead.is_empty() {
            match out.last_mut() {
                Some(prev) => {
                    prev.push(' ');
                    prev.push_str(lead);
                }
                None => {
                    if !pending_prefix.is_empty() {
                        pending_prefix.push(' ');
                    }
                    pending_prefix.push_str(lead);
                }
            }
        }
        if rest.is_empty() {
            continue;
        }
        if pending_prefix.is_empty() {
            out.push(rest.to_string());
        } else {
            out.push(format!("{} {}", std::mem::take(&mut pending_prefix), rest));
        }
    }
    out
}

/// Checks that each sentence cites at least one id from `evidence_ids`.
pub fn validate<S: AsRef<str> + Ord>(text: &str, evidence_ids: &BTreeSet<S>) -> GroundingReport {
    let resolvable = |id: &str| evidence_ids.iter().any(|e| e.as_ref() == id);
    let sentences = segment(text);
    let mut grounded = 0;
    let mut ungrounded = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        if extract_refs(s).into_iter().any(resolvable) {
            grounded += 1;
        } else {
            ungrounded.push(i);
        }
    }
    let mut unresolved: Vec<String> = Vec::new();
    for id in extract_refs(text) {
        if !resolvable(id) && !unresolved.iter().any(|u| u == id) {
            unresolved.push(id.to_string());
        }
    }
    let total = sentences.len();
    let groundedness = if total == 0 {
        1.0
    } else {
        grounded as f64 / total as f64
    };
    GroundingReport {
        total_sentences: total,
        grounded_sentences: grounded,
        groundedness,
        passed: ungrounded.is_empty() && unresolved.is_empty(),
        unresolved_tokens: unresolved,
        ungrounded_sentence_indices: ungrounded,
    }
}

/// Removes reference tokens for display.
///
/// A run of tokens is dropped together with its surrounding spaces; a single
/// space is kept only when the run separated two words. Text without tokens is
/// returned unchanged.
pub fn strip_tokens(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in TOKEN_RUN.find_iter(text) {
        out.push_str(&text[last..m.start()]);
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        let at_line_start = before.is_none_or(|c| c == '\n');
        let before_punct_or_end =
            after.is_none_or(|c| c == '\n' || c == '\r' || ".,;:!?)]}。！？'\"".contains(c));
        let had_space = m.as_str().starts_with([' ', '\t']) || m.as_str().ends_with([' ', '\t']);
        if !at_line_start && !before_punct_or_end && had_space {
            out.push(' ');
        }
        last = m.end();
    }
    out.push_str(&text[last..]);
    out
}
