// SPDX-License-Identifier: Apache-2.0

//! The 22-type insight catalog, cards and user profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

macro_rules! insight_types {
    ($( $variant:ident => $name:literal, $req:ident, $query:literal; )*) => {
        /// Daily insight templates. Arm ids of the bandit layer are the snake_case names.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum InsightType { $($variant),* }

        impl InsightType {
            pub const ALL: &'static [InsightType] = &[$(InsightType::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self { $(InsightType::$variant => $name),* }
            }

            /// What user data the template needs.
            pub fn requirement(self) -> Requirement {
                match self { $(InsightType::$variant => Requirement::$req),* }
            }

            /// Retrieval keywords for the template.
            pub fn keywords(self) -> &'static str {
                match self { $(InsightType::$variant => $query),* }
            }
        }

        impl FromStr for InsightType {
            type Err = UnknownInsightType;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s { $($name => Ok(InsightType::$variant),)* _ => Err(UnknownInsightType(s.to_string())) }
            }
        }
    };
}

insight_types! {
    PortfolioReturnContributors => "portfolio_return_contributors", Holdings, "return contribution performance";
    PortfolioDailySummary => "portfolio_daily_summary", Holdings, "closing price daily change";
    PortfolioRiskConcentration => "portfolio_risk_concentration", Holdings, "sector weight volatility risk";
    PortfolioDividendCalendar => "portfolio_dividend_calendar", Holdings, "dividend record date payout";
    HoldingDisclosureAlert => "holding_disclosure_alert", Holdings, "disclosure filing";
    WatchlistDisclosureAlert => "watchlist_disclosure_alert", Watchlist, "disclosure filing";
    WatchlistPriceMovers => "watchlist_price_movers", Watchlist, "shares moved price";
    WatchlistNewsDigest => "watchlist_news_digest", Watchlist, "news report coverage";
    EarningsCalendar => "earnings_calendar", Nothing, "earnings release schedule";
    MarketMovers => "market_movers", Nothing, "top gainers losers";
    IndexSummary => "index_summary", Nothing, "kospi kosdaq index closed";
    SectorNarrative => "sector_narrative", Nothing, "sector outlook narrative";
    ThemeLeaders => "theme_leaders", Nothing, "theme leaders rally";
    InvestorFlows => "investor_flows", Nothing, "foreign institutional net buying";
    DisclosureDigest => "disclosure_digest", Nothing, "disclosure digest filings summary";
    AnalystRatingChanges => "analyst_rating_changes", Nothing, "analyst target price rating";
    NewHighsLows => "new_highs_lows", Nothing, "52 week high low";
    VolumeSpikes => "volume_spikes", Nothing, "trading volume surge";
    FxBrief => "fx_brief", Nothing, "won dollar exchange rate";
    CommodityBrief => "commodity_brief", Nothing, "oil gold commodity prices";
    EconomicCalendar => "economic_calendar", Nothing, "economic calendar inflation rate decision";
    IpoSchedule => "ipo_schedule", Nothing, "ipo subscription listing";
}

/// Size of the insight catalog.
pub const INSIGHT_TYPE_COUNT: usize = 22;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown insight type `{0}`")]
pub struct UnknownInsightType(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    Nothing,
    Holdings,
    Watchlist,
}

impl InsightType {
    pub fn index(self) -> usize {
        self as usize
    }

    /// Disclosure alerts skip the read down-weighting so they always surface.
    pub fn is_mandatory_disclosure(self) -> bool {
        matches!(self, InsightType::HoldingDisclosureAlert | InsightType::WatchlistDisclosureAlert)
    }
}

impl fmt::Display for InsightType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One pre-generated feed item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsightCard {
    pub card_id: String,
    pub user_id: String,
    pub insight_type: InsightType,
    pub tickers: Vec<String>,
    pub created_at: DateTime<Utc>,
    /// Grounded text with reference tokens.
    pub body: String,
    pub evidence_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedEvent {
    Impression,
    Click,
    Dwell,
}

impl FromStr for FeedEvent {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "impression" => Ok(FeedEvent::Impression),
            "click" => Ok(FeedEvent::Click),
            "dwell" => Ok(FeedEvent::Dwell),
            other => Err(format!("unknown event `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub insight_type: InsightType,
    pub event: FeedEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_ms: Option<u64>,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    #[serde(default)]
    pub owned_tickers: BTreeSet<String>,
    #[serde(default)]
    pub watched_tickers: BTreeSet<String>,
    /// card id → time it was read.
    #[serde(default)]
    pub read_cards: BTreeMap<String, DateTime<Utc>>,
    /// Time-ordered.
    #[serde(default)]
    pub history: Vec<Interaction>,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            ..Self::default()
        }
    }

    pub fn with_owned<I: IntoIterator<Item = S>, S: Into<String>>(mut self, tickers: I) -> Self {
        self.owned_tickers.extend(tickers.into_iter().map(Into::into));
        self
    }

    pub fn with_watched<I: IntoIterator<Item = S>, S: Into<String>>(mut self, tickers: I) -> Self {
        self.watched_tickers.extend(tickers.into_iter().map(Into::into));
        self
    }

    pub fn has_read(&self, card_id: &str) -> bool {
        self.read_cards.contains_key(card_id)
    }

    /// Records an interaction; clicks and dwells mark the card read.
    /// Out-of-order timestamps are clamped to keep the history ordered.
    pub fn record(&mut self, card: &InsightCard, event: FeedEvent, dwell_ms: Option<u64>, at: DateTime<Utc>) {
        self.record_event(&card.card_id, card.insight_type, event, dwell_ms, at);
    }

    /// [`record`](Self::record) without the card body, for replaying event logs.
    pub fn record_event(
        &mut self,
        card_id: &str,
        insight_type: InsightType,
        event: FeedEvent,
        dwell_ms: Option<u64>,
        at: DateTime<Utc>,
    ) {
        let at = match self.history.last() {
            Some(last) if last.at > at => last.at,
            _ => at,
        };
        self.history.push(Interaction {
            insight_type,
            event,
            dwell_ms,
            at,
        });
        if event != FeedEvent::Impression {
            self.read_cards.entry(card_id.to_string()).or_insert(at);
        }
    }

    /// Insight types the user actually opened, oldest first.
    pub fn reading_sequence(&self) -> Vec<InsightType> {
        self.history
            .iter()
            .filter(|i| i.event != FeedEvent::Impression)
            .map(|i| i.insight_type)
            .collect()
    }
}
