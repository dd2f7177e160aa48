// SPDX-License-Identifier: Apache-2.0

//! Query expansion: ontology synonyms plus relative-date normalization.
//!
//! Relative time phrases resolve against a reference date. Weeks start on
//! Monday. "This" periods run from the start of the period to the reference
//! date; "last" periods cover the whole previous period.
//!
//! | phrase                          | window                          |
//! |---------------------------------|---------------------------------|
//! | today, 오늘                     | [d, d]                          |
//! | yesterday, 어제                 | [d-1, d-1]                      |
//! | this week, 이번 주              | [monday(d), d]                  |
//! | last week, 지난주, 지난 주      | previous Monday..Sunday         |
//! | this month, 이번 달             | [1st of month, d]               |
//! | last month, 지난달, 지난 달     | previous calendar month         |
//! | this quarter, 이번 분기         | [quarter start, d]              |
//! | last quarter, 지난 분기         | previous calendar quarter       |
//! | this year, 올해                 | [Jan 1, d]                      |
//! | last year, 작년, 지난해         | previous calendar year          |
//!
//! Korean phrases match with or without the inner space. Only the earliest
//! phrase in the query is used (the longest, if two start together).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use chrono::{Datelike, Duration, NaiveDate};
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::text::tokenize;

/// Term → related terms (synonyms, hypernyms). Keys may be multi-word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ontology {
    entries: BTreeMap<String, Vec<String>>,
}

impl Ontology {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|(k, v)| (tokenize(&k).join(" "), v))
                .filter(|(k, _)| !k.is_empty())
                .collect(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        Ok(Self::new(raw))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl TimeWindow {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedQuery {
    pub original: String,
    pub expansion_terms: Vec<String>,
    pub time_window: Option<TimeWindow>,
    /// Byte span of the matched time phrase inside `original`.
    #[serde(skip)]
    time_phrase: Option<(usize, usize)>,
}

impl ExpandedQuery {
    /// A query with no expansion and no window.
    pub fn plain(text: impl Into<String>) -> Self {
        Self {
            original: text.into(),
            expansion_terms: Vec::new(),
            time_window: None,
            time_phrase: None,
        }
    }

    pub fn with_window(mut self, window: TimeWindow) -> Self {
        self.time_window = Some(window);
        self
    }

    /// Deduplicated lexical terms: the original minus any time phrase, then
    /// expansion terms.
    pub fn search_terms(&self) -> Vec<String> {
        let base = match self.time_phrase {
            Some((s, e)) => format!("{} {}", &self.original[..s], &self.original[e..]),
            None => self.original.clone(),
        };
        let mut seen = BTreeSet::new();
        tokenize(&base)
            .into_iter()
            .chain(self.expansion_terms.iter().flat_map(|t| tokenize(t)))
            .filter(|t| seen.insert(t.clone()))
            .collect()
    }

    /// Text handed to the embedder: original followed by expansion terms.
    pub fn embedding_text(&self) -> String {
        let mut s = self.original.clone();
        for t in &self.expansion_terms {
            s.push(' ');
            s.push_str(t);
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
enum Period {
    Today,
    Yesterday,
    ThisWeek,
    LastWeek,
    ThisMonth,
    LastMonth,
    ThisQuarter,
    LastQuarter,
    ThisYear,
    LastYear,
}

const PHRASES: &[(&str, Period)] = &[
    (r"\btoday\b", Period::Today),
    (r"\byesterday\b", Period::Yesterday),
    (r"\bthis\s+week\b", Period::ThisWeek),
    (r"\blast\s+week\b", Period::LastWeek),
    (r"\bthis\s+month\b", Period::ThisMonth),
    (r"\blast\s+month\b", Period::LastMonth),
    (r"\bthis\s+quarter\b", Period::ThisQuarter),
    (r"\blast\s+quarter\b", Period::LastQuarter),
    (r"\bthis\s+year\b", Period::ThisYear),
    (r"\blast\s+year\b", Period::LastYear),
    ("오늘", Period::Today),
    ("어제", Period::Yesterday),
    (r"이번\s*주", Period::ThisWeek),
    (r"지난\s*주", Period::LastWeek),
    (r"이번\s*달", Period::ThisMonth),
    (r"지난\s*달", Period::LastMonth),
    (r"이번\s*분기", Period::ThisQuarter),
    (r"지난\s*분기", Period::LastQuarter),
    ("올해", Period::ThisYear),
    ("작년", Period::LastYear),
    ("지난해", Period::LastYear),
];

static PHRASE_TABLE: LazyLock<Vec<(Regex, Period)>> = LazyLock::new(|| {
    PHRASES
        .iter()
        .map(|(p, period)| {
            let re = RegexBuilder::new(p).case_insensitive(true).build().expect("valid phrase");
            (re, *period)
        })
        .collect()
});

fn quarter_start(d: NaiveDate) -> NaiveDate {
    let m = (d.month0() / 3) * 3 + 1;
    NaiveDate::from_ymd_opt(d.year(), m, 1).expect("valid")
}

fn month_start(d: NaiveDate) -> NaiveDate {
    d.with_day(1).expect("day 1 exists")
}

fn resolve(period: Period, d: NaiveDate) -> TimeWindow {
    let w = |start, end| TimeWindow { start, end };
    match period {
        Period::Today => w(d, d),
        Period::Yesterday => {
            let y = d - Duration::days(1);
            w(y, y)
        }
        Period::ThisWeek => w(d - Duration::days(d.weekday().num_days_from_monday() as i64), d),
        Period::LastWeek => {
            let this_monday = d - Duration::days(d.weekday().num_days_from_monday() as i64);
            w(this_monday - Duration::days(7), this_monday - Duration::days(1))
        }
        Period::ThisMonth => w(month_start(d), d),
        Period::LastMonth => {
            let end = month_start(d) - Duration::days(1);
            w(month_start(end), end)
        }
        Period::ThisQuarter => w(quarter_start(d), d),
        Period::LastQuarter => {
            let end = quarter_start(d) - Duration::days(1);
            w(quarter_start(end), end)
        }
        Period::ThisYear => w(NaiveDate::from_ymd_opt(d.year(), 1, 1).expect("valid"), d),
        Period::LastYear => w(
            NaiveDate::from_ymd_opt(d.year() - 1, 1, 1).expect("valid"),
            NaiveDate::from_ymd_opt(d.year() - 1, 12, 31).expect("valid"),
        ),
    }
}

/// Expands `query` with ontology terms and a resolved time window.
pub fn expand_query(query: &str, ontology: &Ontology, reference_date: NaiveDate) -> ExpandedQuery {
    let tokens = tokenize(query);
    let mut seen = BTreeSet::new();
    let mut expansion_terms = Vec::new();
    for (key, related) in &ontology.entries {
        let key_tokens: Vec<&str> = key.split(' ').collect();
        let matched = tokens
            .windows(key_tokens.len())
            .any(|w| w.iter().map(String::as_str).eq(key_tokens.iter().copied()));
        if matched {
            for t in related {
                if seen.insert(t.clone()) {
                    expansion_terms.push(t.clone());
                }
            }
        }
    }

    let mut best: Option<(usize, usize, Period)> = None;
    for (re, period) in PHRASE_TABLE.iter() {
        if let Some(m) = re.find(query) {
            let better = match best {
                None => true,
                Some((s, e, _)) => m.start() < s || (m.start() == s && m.end() > e),
            };
            if better {
                best = Some((m.start(), m.end(), *period));
            }
        }
    }

    ExpandedQuery {
        original: query.to_string(),
        expansion_terms,
        time_window: best.map(|(_, _, p)| resolve(p, reference_date)),
        time_phrase: best.map(|(s, e, _)| (s, e)),
    }
}
