// SPDX-License-Identifier: Apache-2.0

//! Evidence templates: the citation-tokenized context block handed to a generator.
//!
//! Layout, one line per entry in fused-rank order:
//!
//! ```text
//! [ref:<id>] <passage text>
//! ```
//!
//! The character budget covers the whole rendered block including tokens and
//! newlines. Passage text is cut at sentence boundaries. The first entry is
//! always emitted: if not even its first sentence fits, that sentence is cut
//! at a character boundary (possibly to nothing, leaving just the token).
//! Later entries that cannot fit one whole sentence end the block.

use serde::{Deserialize, Serialize};

use super::{EvidencePassage, RetrievalError};
use crate::grounding::ref_token;
use crate::text::{split_sentences, take_chars};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceEntry {
    pub ref_id: String,
    pub source_module: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceBlock {
    pub entries: Vec<EvidenceEntry>,
}

impl EvidenceBlock {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&ref_token(&e.ref_id));
            out.push(' ');
            out.push_str(&e.text);
            out.push('\n');
        }
        out
    }

    pub fn ref_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.ref_id.as_str())
    }
}

pub fn build_evidence_template(
    passages: &[EvidencePassage],
    max_chars: usize,
) -> Result<EvidenceBlock, RetrievalError> {
    if passages.is_empty() {
        return Err(RetrievalError::EmptyEvidence);
    }
    let mut ordered: Vec<&EvidencePassage> = passages.iter().collect();
    ordered.sort_by_key(|p| p.fused_rank);

    let mut remaining = max_chars;
    let mut entries = Vec::new();
    for (i, p) in ordered.into_iter().enumerate() {
        // "[ref:" + id + "] " + text + "\n"
        let overhead = p.passage_id.chars().count() + 8;
        let mut text = String::new();
        let mut used = overhead;
        for s in split_sentences(&p.passage_text) {
            let extra = s.chars().count() + usize::from(!text.is_empty());
            if used + extra > remaining {
                break;
            }
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(s);
            used += extra;
        }
        if text.is_empty() {
            if i > 0 {
                break;
            }
            let first = split_sentences(&p.passage_text).first().copied().unwrap_or("");
            text = take_chars(first, remaining.saturating_sub(overhead)).trim_end().to_string();
            entries.push(EvidenceEntry {
                ref_id: p.passage_id.clone(),
                source_module: p.source_module.clone(),
                text,
            });
            break;
        }
        remaining -= used;
        entries.push(EvidenceEntry {
            ref_id: p.passage_id.clone(),
            source_module: p.source_module.clone(),
            text,
        });
    }
    Ok(EvidenceBlock { entries })
}
