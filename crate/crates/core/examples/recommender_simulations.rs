// SPDX-License-Identifier: Apache-2.0

//! Seeded simulations: LinUCB against uniform random on a linear-reward
//! environment, and feed repetition with and without read down-weighting.
//!
//! ```text
//! cargo run --release --example recommender_simulations
//! ```

use groundpilot::recommender::sim::{
    simulate_bandit, simulate_repetition, LinearEnvironment, RepetitionConfig,
};
use groundpilot::recommender::{RankParams, RuleParams};

fn main() {
    let env = LinearEnvironment::new(5, 5, 7);
    let report = simulate_bandit(&env, 10_000, 1.0, 11);
    println!(
        "bandit: linucb={} random={} lift={:.3}",
        report.linucb_reward,
        report.random_reward,
        report.lift()
    );

    let config = RepetitionConfig::default();
    let run = |read_multiplier: f64| {
        let params = RankParams {
            rule: RuleParams {
                read_multiplier,
                ..RuleParams::default()
            },
            ..RankParams::default()
        };
        simulate_repetition(&config, &params, 13)
    };
    let (down, flat) = (run(0.2), run(1.0));
    println!(
        "repetition: reshow fraction {:.4} at 0.2 vs {:.4} at 1.0 (relative reduction {:.1}%)",
        down.reshow_fraction(),
        flat.reshow_fraction(),
        100.0 * (1.0 - down.reshow_fraction() / flat.reshow_fraction())
    );
}
