// SPDX-License-Identifier: Apache-2.0

//! Pre-generates a user's insight cards, ranks them under a trust budget,
//! feeds a few clicks back into the bandit and ranks again.
//!
//! ```text
//! cargo run --example feed_ranking
//! ```

use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use groundpilot::clock::{Clock, ManualClock};
use groundpilot::demo;
use groundpilot::recommender::{
    insight_arm_store, pregenerate, rank_feed, shape_reward, FeedEvent, MarkovPredictor, RankParams, RankingTrace,
    TemplateCardBuilder, UserProfile,
};
use groundpilot::retrieval::{HashingEmbedder, HybridIndex, HybridRetriever, RetrievalConfig, SearchScope};
use groundpilot::router::TemplateAdapter;

fn print_trace(t: &RankingTrace) {
    println!("{:<4} {:<4} {:<30} {:>8} {:>8} {:>8}", "pos", "base", "type", "rule", "seq", "ucb");
    for (pos, id) in t.final_order.iter().enumerate() {
        let c = t.card(id).expect("ranked card");
        println!(
            "{:<4} {:<4} {:<30} {:>8.3} {:>8.3} {:>8.3}",
            pos, c.baseline_pos, c.arm_id, c.rule_score, c.seq_prob, c.ucb
        );
    }
    println!("max displacement {} (budget {})\n", t.max_displacement(), t.budget);
}

fn main() {
    let clock = ManualClock::new(Utc.with_ymd_and_hms(2025, 1, 10, 6, 0, 0).unwrap());
    let manifest = demo::manifest();
    let index = Arc::new(HybridIndex::new(Arc::new(HashingEmbedder::default())));
    index.refresh(demo::corpus()).expect("demo corpus indexes");
    let retriever = Arc::new(HybridRetriever::new(index, demo::ontology(), RetrievalConfig::default()));
    let public = SearchScope::modules(
        manifest.modules().iter().filter(|m| !m.sensitivity.is_pii()).map(|m| m.id.clone()),
    );
    let builders = TemplateCardBuilder::full_set(retriever, Arc::new(TemplateAdapter::internal()), public);

    let mut user = UserProfile::new("u001").with_owned(["005930", "000660"]).with_watched(["035420"]);
    let out = pregenerate(&user, &builders, &clock).expect("one builder per type");
    println!("{} cards, {} types skipped", out.cards.len(), out.skipped.len());
    for s in &out.skipped {
        println!("  skipped {}: {}", s.insight_type, s.reason);
    }
    println!();

    let arms = insight_arm_store(1.0);
    let predictor = MarkovPredictor::default();
    let params = RankParams::default();
    let budget = 2;
    let first = rank_feed(&out.cards, &user, &arms.snapshot(), &predictor, &params, budget, clock.now())
        .expect("arms are well formed");
    print_trace(&first);

    // the user clicks the card in slot 2 three times in a row, with long dwell
    let liked = first.card(&first.final_order[2]).expect("ranked card").clone();
    let card = out.cards.iter().find(|c| c.card_id == liked.card_id).expect("pool card");
    for _ in 0..3 {
        clock.advance(Duration::minutes(5));
        arms.update(&liked.arm_id, &liked.context, shape_reward(FeedEvent::Dwell, Some(40_000)))
            .expect("context has the arm dimension");
        user.record(card, FeedEvent::Dwell, Some(40_000), clock.now());
    }
    println!("after 3 dwells on {}:", liked.arm_id);
    let second = rank_feed(&out.cards, &user, &arms.snapshot(), &predictor, &params, budget, clock.now())
        .expect("arms are well formed");
    print_trace(&second);
}
