// SPDX-License-Identifier: Apache-2.0

//! Offline evaluation: routing scores on a labeled set, reviewer agreement,
//! latency percentiles and replay estimates for three policies on a
//! uniformly logged bandit trace.
//!
//! ```text
//! cargo run --release --example offline_eval [-- <log.jsonl>]
//! ```
//!
//! With a path argument the synthetic log is also written there, ready for
//! `groundpilot replay --log <log.jsonl> --policy linucb`.

use groundpilot::evalmetrics::{
    kappa_from_table, parse_routing_cases, percentile, replay_evaluate, routing_score_batch, synthetic_linear_log,
    FixedArm, LinUcbPolicy, ReplayPolicy, UniformRandom,
};
use groundpilot::recommender::sim::LinearEnvironment;

const CASES: &str = include_str!("../data/fixtures/routing_cases.jsonl");

fn main() {
    let cases = parse_routing_cases(CASES).expect("fixture parses");
    let batch = routing_score_batch(&cases, 0.5, 0.5).expect("gold sets are non-empty");
    println!("routing: {} cases, mean {:.4}, sum {:.4}", cases.len(), batch.mean, batch.sum);

    let kappa = kappa_from_table([[20, 5], [10, 15]]).expect("non-empty table");
    println!("kappa for [[20, 5], [10, 15]]: {kappa}");

    let latencies: Vec<f64> = (1..=200).map(|i| f64::from(i * 37 % 1000)).collect();
    for p in [50.0, 95.0, 99.0] {
        println!("p{p}: {} ms", percentile(&latencies, p).expect("non-empty"));
    }

    let env = LinearEnvironment::new(5, 5, 7);
    let log = synthetic_linear_log(&env, 50_000, 3);
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, log.to_jsonl()).expect("log path is writable");
        println!("\nwrote {path}");
    }
    let mut policies: Vec<Box<dyn ReplayPolicy>> = vec![
        Box::new(UniformRandom::new(1)),
        Box::new(FixedArm("arm0".into())),
        Box::new(LinUcbPolicy::new(&log.header.arms, log.header.dimension, 1.0)),
    ];
    println!("\nreplay over {} logged events:", log.events.len());
    for p in policies.iter_mut() {
        let r = replay_evaluate(&log, p.as_mut()).expect("uniform log");
        println!(
            "  {:<16} matched {:>6}  estimate {:.4} ± {:.4}",
            r.policy,
            r.matched,
            r.estimate.unwrap_or(f64::NAN),
            r.std_error.unwrap_or(f64::NAN)
        );
    }
}
