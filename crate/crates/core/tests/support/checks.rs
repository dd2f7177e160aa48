// SPDX-License-Identifier: Apache-2.0

//! One function per acceptance criterion. Each returns a short summary on
//! success and the first discrepancy on failure.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::Duration;
use groundpilot::clock::ManualClock;
use groundpilot::demo;
use groundpilot::evalmetrics::{
    kappa_from_table, load_routing_cases, percentile, routing_score, routing_score_batch, RoutingCase,
};
use groundpilot::grounding::{self, extract_refs};
use groundpilot::guard::{evaluate_f1, Direction, Guard, GuardVerdict, LabeledSample};
use groundpilot::recommender::sim::{simulate_bandit, simulate_repetition, LinearEnvironment, RepetitionConfig};
use groundpilot::recommender::{
    bandit_select, budgeted_order, rank_feed, ArmState, FeedEvent, InsightCard, InsightType, MarkovPredictor,
    RankParams, RuleParams, UserProfile, CONTEXT_DIM,
};
use groundpilot::retrieval::{
    build_evidence_template, fuse, Document, Embedder, EvidencePassage, ExpandedQuery, HashingEmbedder, HybridIndex,
    SearchScope,
};
use groundpilot::router::{GenerationAdapter, GenerationContext, ModelPath, Outcome, RoutingPolicy, TemplateAdapter};
use groundpilot::service::{chat_gauges, parse_metrics, router, AppState, FeedResponse};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fixtures::{demo_now, fixture_path, Rig, BENIGN, BLOCKED_QUERIES};
use super::oracle;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn set(ids: &[&str]) -> BTreeSet<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

// 1 ------------------------------------------------------------------------

pub fn routing_score_fidelity() -> Check {
    let cases = load_routing_cases(fixture_path("routing_cases.jsonl")).map_err(|e| e.to_string())?;
    let expected: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(fixture_path("routing_cases.expected.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    ensure!(cases.len() == 50, "expected 50 cases, found {}", cases.len());
    let batch = routing_score_batch(&cases, 0.5, 0.5).map_err(|e| e.to_string())?;

    let mut total = oracle::Ratio::new(0, 1);
    for (i, c) in cases.iter().enumerate() {
        let exact = oracle::routing_score_half(&c.gold, &c.predicted);
        let recorded = oracle::Ratio::parse(expected["scores_exact"][i].as_str().ok_or("scores_exact missing")?);
        ensure!(exact == recorded, "case {i}: oracle {exact:?} disagrees with the checked-in {recorded:?}");
        let got = batch.scores[i];
        ensure!((got - exact.to_f64()).abs() <= 1e-12, "case {i}: score {got} vs oracle {}", exact.to_f64());
        total = total.add(exact);
    }
    let mean = oracle::Ratio::new(total.num, total.den * cases.len() as i128);
    ensure!(mean == oracle::Ratio::new(161, 240), "oracle mean {mean:?} is not 161/240");
    ensure!((batch.mean - mean.to_f64()).abs() <= 1e-12, "mean {} vs oracle {}", batch.mean, mean.to_f64());

    let case = |g: &[&str], p: &[&str]| RoutingCase {
        query: String::new(),
        gold: set(g),
        predicted: set(p),
    };
    let worked = [
        (case(&["A", "B"], &["A", "B"]), 0.5, 0.5, 1.0),
        (case(&["A", "B"], &["A", "D"]), 0.5, 0.5, 0.5),
        (case(&["A", "B"], &["C", "D"]), 0.3, 0.7, 0.0),
    ];
    for (c, a, b, want) in worked {
        let got = routing_score(&c, a, b).map_err(|e| e.to_string())?;
        ensure!(got == want, "worked example {:?}/{:?}: {got} != {want}", c.gold, c.predicted);
    }
    Ok(format!("50 cases, mean {:.6} (161/240), 3 worked examples exact", batch.mean))
}

// 2 ------------------------------------------------------------------------

const PII_BAIT: &[&str] = &[
    "my", "holdings", "account", "balance", "transaction", "bought", "sold", "watchlist", "portfolio", "tier",
    "samsung", "005930", "news", "price", "dividend", "return",
];

fn random_query(r: &mut ChaCha8Rng) -> String {
    match r.random_range(0..10) {
        0..4 => BENIGN.choose(r).expect("non-empty").1.to_string(),
        4..8 => (0..r.random_range(1..=6))
            .map(|_| *PII_BAIT.choose(r).expect("non-empty"))
            .collect::<Vec<_>>()
            .join(" "),
        8 => BLOCKED_QUERIES.choose(r).expect("non-empty").to_string(),
        _ => format!("{} my holdings and account", BENIGN.choose(r).expect("non-empty").1),
    }
}

pub fn zero_pii_egress() -> Check {
    let rig = Rig::demo(RoutingPolicy { allow_external: true });
    let manifest = demo::manifest();
    ensure!(
        manifest.components().len() == 20 && manifest.modules().len() == 48,
        "demo manifest is not the 20/48 catalog"
    );
    let pii = manifest.pii_modules();
    let components: Vec<&str> = manifest.components().iter().map(|c| c.id.as_str()).collect();
    let users = ["u001", "u002", "u003", "u004", "u999"];
    let mut r = rng(2);
    let mut pii_requests = 0;
    for n in 0..10_000 {
        let comp = *components.choose(&mut r).expect("non-empty");
        let user = *users.choose(&mut r).expect("non-empty");
        let q = random_query(&mut r);
        if manifest.get_component(comp).expect("known").sensitivity.is_pii() {
            pii_requests += 1;
        }
        rig.orchestrator
            .invoke(&rig.request(n, user, comp, &q))
            .map_err(|e| e.to_string())?;
    }

    let snapshot = rig.retriever.index().snapshot();
    let records = rig.external.transcript().ok_or("external adapter keeps no transcript")?.records();
    let mut violations = Vec::new();
    for rec in &records {
        let comp = manifest.get_component(&rec.component_id).map_err(|e| e.to_string())?;
        if comp.sensitivity.is_pii() {
            violations.push(format!("PII component {} invoked externally", rec.component_id));
        }
        let mut ids: BTreeSet<&str> = rec.evidence_ids.iter().map(String::as_str).collect();
        ids.extend(extract_refs(&rec.prompt));
        for id in ids {
            match snapshot.passage(id) {
                Some(p) if pii.contains(p.source_module.as_str()) => {
                    violations.push(format!("PII passage {id} ({}) sent externally", p.source_module))
                }
                Some(_) => {}
                None => violations.push(format!("unknown passage {id} in egress")),
            }
        }
        for m in &rec.evidence_modules {
            if pii.contains(m.as_str()) {
                violations.push(format!("PII module {m} in egress"));
            }
        }
    }
    for a in rig.audit.records() {
        if a.model_path == Some(ModelPath::External)
            && manifest.get_component(&a.component_id).is_ok_and(|c| c.sensitivity.is_pii())
        {
            violations.push(format!("{} routed PII component externally", a.request_id));
        }
    }
    ensure!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
    ensure!(!records.is_empty(), "workload produced no external traffic");
    ensure!(pii_requests > 0, "workload sent no PII-component requests");
    Ok(format!(
        "10000 requests ({pii_requests} to PII components), {} external calls, 0 violations",
        records.len()
    ))
}

// 3 ------------------------------------------------------------------------

pub fn routing_determinism() -> Check {
    let scripted = [
        ("u001", "news_search", "latest news on sk hynix"),
        ("u001", "portfolio_analysis", "how are my holdings doing"),
        ("u002", "stock_quote", BLOCKED_QUERIES[0]),
    ];
    let render = |rig: &Rig, i: usize, (u, c, q): (&str, &str, &str)| -> Result<String, String> {
        let inv = rig.orchestrator.invoke(&rig.request(i, u, c, q)).map_err(|e| e.to_string())?;
        Ok(format!(
            "{}\n{}",
            serde_json::to_string(&inv.response).expect("serializes"),
            serde_json::to_string(&inv.audit.without_timing()).expect("serializes")
        ))
    };
    let rig = Rig::demo(RoutingPolicy::default());
    let fresh = Rig::demo(RoutingPolicy::default());
    let mut diffs = 0;
    for (i, &req) in scripted.iter().enumerate() {
        let first = render(&rig, i, req)?;
        if render(&fresh, i, req)? != first {
            diffs += 1;
        }
        for _ in 0..1000 {
            if render(&rig, i, req)? != first {
                diffs += 1;
            }
        }
    }
    ensure!(diffs == 0, "{diffs} responses or audit records differed");
    Ok("3 requests x 1000 repeats plus a fresh instance, 0 diffs".into())
}

// 4 ------------------------------------------------------------------------

const VOCAB: &[&str] = &[
    "samsung", "hynix", "kospi", "dividend", "earnings", "guidance", "memory", "chip", "export", "won", "dollar",
    "rate", "oil", "gold", "filing", "merger", "record", "date", "price", "target", "rally", "sector", "bank",
    "insurance", "반도체", "배당", "2025", "q3", "76900", "etf",
];

fn random_text(r: &mut ChaCha8Rng, max_words: usize) -> String {
    let n = r.random_range(1..=max_words);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str([" ", " ", " ", ", ", ". ", "-"][r.random_range(0..6)]);
        }
        let w = *VOCAB.choose(r).expect("non-empty");
        if r.random_bool(0.1) {
            s.push_str(&w.to_uppercase());
        } else {
            s.push_str(w);
        }
    }
    s
}

fn random_docs(r: &mut ChaCha8Rng, n: usize) -> Vec<Document> {
    let mut texts: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let t = match texts.choose(r) {
            Some(prev) if r.random_bool(0.1) => prev.clone(),
            _ => random_text(r, 40),
        };
        texts.push(t);
    }
    texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| Document {
            doc_id: format!("d{i:02}"),
            source_module: "news_retrieval".into(),
            text,
            published_at: demo_now(),
            metadata: BTreeMap::new(),
        })
        .collect()
}

fn compare_ranked(what: &str, got: &[(String, f64)], want: &[(String, f64)]) -> Result<(), String> {
    let ids = |v: &[(String, f64)]| v.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>();
    ensure!(ids(got) == ids(want), "{what}: ranking {:?} vs oracle {:?}", ids(got), ids(want));
    for ((id, a), (_, b)) in got.iter().zip(want) {
        ensure!((a - b).abs() <= 1e-9, "{what}: {id} scored {a} vs oracle {b}");
    }
    Ok(())
}

pub fn retrieval_oracle() -> Check {
    let mut r = rng(4);
    let embedder = HashingEmbedder::default();
    let mut compared = 0;
    for trial in 0..200 {
        let n = r.random_range(1..=50);
        let docs = random_docs(&mut r, n);
        let query = if r.random_bool(0.1) {
            format!("{} unseenterm", random_text(&mut r, 4))
        } else {
            random_text(&mut r, 5)
        };
        let k = r.random_range(1..=n + 2);

        let index = HybridIndex::new(Arc::new(embedder));
        let g = index.refresh(docs.clone()).map_err(|e| e.to_string())?;
        let q = ExpandedQuery::plain(query.as_str());
        let scope = SearchScope::all();

        let pairs: Vec<(String, String)> = docs.iter().map(|d| (d.doc_id.clone(), d.text.clone())).collect();
        let sparse = g.sparse_search(&q, k, &scope);
        compare_ranked(&format!("trial {trial} sparse `{query}`"), &sparse, &oracle::bm25(&pairs, &query, k))?;

        let vectors: Vec<(String, Vec<f64>)> =
            docs.iter().map(|d| (d.doc_id.clone(), embedder.embed(&d.text))).collect();
        let qv = embedder.embed(&q.embedding_text());
        let dense = g.dense_search(&qv, &q, k, &scope).map_err(|e| e.to_string())?;
        compare_ranked(&format!("trial {trial} dense `{query}`"), &dense, &oracle::cosine_scan(&vectors, &qv, k))?;
        compared += sparse.len() + dense.len();
    }
    Ok(format!("200 corpora, {compared} ranked hits identical to brute force"))
}

// 5 ------------------------------------------------------------------------

pub fn fusion_checks() -> Check {
    let list = |ids: &[&str]| -> Vec<(String, f64)> {
        ids.iter().enumerate().map(|(i, id)| (id.to_string(), 10.0 - i as f64)).collect()
    };
    let single = list(&["c", "a", "e", "b"]);
    for (sp, de) in [(&single, &Vec::new()), (&Vec::new(), &single)] {
        let fused = fuse(sp, de, 10, 60.0);
        let order: Vec<&str> = fused.iter().map(|h| h.id.as_str()).collect();
        ensure!(order == ["c", "a", "e", "b"], "single-list fusion reordered: {order:?}");
        for (i, h) in fused.iter().enumerate() {
            ensure!(h.fused_score == 1.0 / (61.0 + i as f64), "single-list score {} at rank {}", h.fused_score, i + 1);
        }
    }
    let both = fuse(&list(&["x", "y"]), &list(&["x", "z"]), 10, 60.0);
    ensure!(both[0].id == "x" && both[0].fused_score == 2.0 / 61.0, "top of both lists scored {}", both[0].fused_score);

    let mut r = rng(5);
    let pool: Vec<String> = (0..15).map(|i| format!("p{i:02}")).collect();
    for trial in 0..10_000 {
        let mut a = pool.clone();
        a.shuffle(&mut r);
        a.truncate(r.random_range(1..=15));
        let mut b = pool.clone();
        b.shuffle(&mut r);
        b.truncate(r.random_range(0..=15));
        let mut scored = |v: &[String]| v.iter().map(|id| (id.clone(), r.random::<f64>())).collect::<Vec<_>>();
        let (sa, sb) = (scored(&a), scored(&b));

        // promote one item by one rank in the first list, or append it to the second
        let mut sa2 = sa.clone();
        let mut sb2 = sb.clone();
        let target = if sa.len() > 1 && r.random_bool(0.5) {
            let p = r.random_range(1..sa.len());
            sa2.swap(p - 1, p);
            sa[p].0.clone()
        } else {
            let missing: Vec<&String> = a.iter().filter(|id| !b.contains(id)).collect();
            let Some(id) = missing.choose(&mut r) else { continue };
            sb2.push(((*id).clone(), 0.0));
            (*id).clone()
        };
        let score_of = |hits: &[groundpilot::retrieval::FusedHit]| {
            hits.iter().find(|h| h.id == target).map(|h| (h.fused_score, h.fused_rank))
        };
        let before = score_of(&fuse(&sa, &sb, 100, 60.0)).ok_or("target missing")?;
        let after = score_of(&fuse(&sa2, &sb2, 100, 60.0)).ok_or("target missing")?;
        ensure!(
            after.0 > before.0 && after.1 <= before.1,
            "trial {trial}: promoting {target} moved it from {before:?} to {after:?}"
        );
    }
    Ok("degeneracy and 2/61 exact; 10000 monotonicity trials".into())
}

// 6 ------------------------------------------------------------------------

/// Ten sentences, seven citing evidence that exists.
pub const GROUNDING_FIXTURE: &str = "Samsung closed at 76,900 won. [ref:d001] \
Volume was steady [ref:d001]. \
Memory prices rose 3.5% in the quarter [ref:d002]. \
The company guided higher. \
Analysts raised targets [ref:d003][ref:d004]. \
Exports to China grew. \
The dividend record date is December 31 [ref:d004]. \
Foreign investors were net buyers [ref:d002]. \
Is the rally sustainable? \
Shares rose again today [ref:d003].";

pub fn grounding_metric() -> Check {
    let ids: BTreeSet<&str> = ["d001", "d002", "d003", "d004"].into_iter().collect();
    let report = grounding::validate(GROUNDING_FIXTURE, &ids);
    ensure!(report.total_sentences == 10, "fixture segmented into {} sentences", report.total_sentences);
    ensure!(report.groundedness == 0.7, "fixture groundedness {}", report.groundedness);
    ensure!(!report.passed, "fixture must not pass");

    let manifest = demo::manifest();
    let adapters = [TemplateAdapter::internal(), TemplateAdapter::external()];
    let mut r = rng(6);
    let fragments = [
        "Shares rose 3.5% today.",
        "Is this sustainable?",
        "Wow!",
        "U.S. demand improved",
        "삼성전자는 상승했다.",
        "see [ref:planted] here.",
        "line one\nline two",
        "...",
        " ",
        "Net income was 1.2 trillion won; margins widened.",
        "End of quarter?!",
    ];
    for run in 0..1000 {
        let n = r.random_range(1..=6);
        let passages: Vec<EvidencePassage> = (0..n)
            .map(|i| {
                let text: Vec<&str> = (0..r.random_range(0..4)).map(|_| *fragments.choose(&mut r).expect("non-empty")).collect();
                EvidencePassage {
                    passage_id: format!("doc-{run}.p{i}_{}", r.random_range(0..100)),
                    doc_id: format!("doc-{run}"),
                    source_module: "news_retrieval".into(),
                    passage_text: text.join(" "),
                    published_at: demo_now(),
                    sparse_score: 0.0,
                    dense_score: 0.0,
                    fused_score: 0.0,
                    fused_rank: i + 1,
                }
            })
            .collect();
        let block = build_evidence_template(&passages, r.random_range(0..600)).map_err(|e| e.to_string())?;
        let component = manifest.components().choose(&mut r).expect("non-empty");
        let ctx = GenerationContext {
            component,
            query: "what happened",
            evidence: &block,
        };
        let text = adapters[run % 2].generate(&ctx).map_err(|e| e.to_string())?;
        let ids: BTreeSet<&str> = block.ref_ids().collect();
        let report = grounding::validate(&text, &ids);
        ensure!(report.passed && report.groundedness == 1.0, "run {run}: template output failed grounding: {text:?}");
    }
    Ok("fixture 0.7 exact and not passed; 1000 template responses all grounded".into())
}

// 7 ------------------------------------------------------------------------

fn random_arms(r: &mut ChaCha8Rng) -> BTreeMap<String, ArmState> {
    let kept: Vec<InsightType> = InsightType::ALL.iter().copied().filter(|_| r.random_bool(0.9)).collect();
    kept.into_iter()
        .map(|t| {
            let mut a = ArmState::new(t.as_str(), CONTEXT_DIM);
            for _ in 0..r.random_range(0..12) {
                let x: Vec<f64> = (0..CONTEXT_DIM).map(|_| r.random_range(-2.0..2.0)).collect();
                a.update(&x, r.random()).expect("valid update");
            }
            (t.as_str().to_string(), a)
        })
        .collect()
}

fn random_pool(r: &mut ChaCha8Rng, n: usize) -> (Vec<InsightCard>, UserProfile) {
    let now = demo_now();
    let tickers = ["005930", "000660", "035420", "051910"];
    let cards: Vec<InsightCard> = (0..n)
        .map(|i| InsightCard {
            card_id: format!("c{i:02}"),
            user_id: "u".into(),
            insight_type: *InsightType::ALL.choose(r).expect("non-empty"),
            tickers: tickers.iter().filter(|_| r.random_bool(0.3)).map(|t| t.to_string()).collect(),
            // a few cards come from the future to exercise clock skew
            created_at: now - Duration::minutes(r.random_range(-30..72 * 60)),
            body: String::new(),
            evidence_ids: Vec::new(),
        })
        .collect();
    let mut profile = UserProfile::new("u")
        .with_owned(tickers.iter().filter(|_| r.random_bool(0.4)).copied())
        .with_watched(tickers.iter().filter(|_| r.random_bool(0.4)).copied());
    for _ in 0..r.random_range(0..10) {
        let t = *InsightType::ALL.choose(r).expect("non-empty");
        let event = [FeedEvent::Impression, FeedEvent::Click, FeedEvent::Dwell][r.random_range(0..3)];
        let card_id = cards.choose(r).map_or_else(|| "gone".to_string(), |c| c.card_id.clone());
        profile.record_event(&card_id, t, event, Some(r.random_range(0..60_000)), now - Duration::hours(r.random_range(1..48)));
    }
    (cards, profile)
}

fn random_params(r: &mut ChaCha8Rng) -> RankParams {
    RankParams {
        rule: RuleParams {
            read_multiplier: r.random(),
            ..RuleParams::default()
        },
        w_rule: r.random_range(0.0..2.0),
        w_seq: r.random_range(0.0..2.0),
        alpha_ucb: r.random_range(0.0..3.0),
    }
}

pub fn trust_budget() -> Check {
    let mut r = rng(7);
    let predictor = MarkovPredictor::default();
    let arm_sets: Vec<BTreeMap<String, ArmState>> = (0..32).map(|_| random_arms(&mut r)).collect();
    let mut violations = 0u64;
    let mut first = String::new();
    for trial in 0..100_000 {
        let n = r.random_range(0..=22);
        let (cards, profile) = random_pool(&mut r, n);
        let budget = r.random_range(0..=6);
        let arms = arm_sets.choose(&mut r).expect("non-empty");
        let trace = rank_feed(&cards, &profile, arms, &predictor, &random_params(&mut r), budget, demo_now())
            .map_err(|e| e.to_string())?;
        let mut problems = Vec::new();
        let mut base = trace.baseline_order.clone();
        let mut fin = trace.final_order.clone();
        base.sort();
        fin.sort();
        let ids: Vec<String> = cards.iter().map(|c| c.card_id.clone()).collect();
        if base != fin || base != ids {
            problems.push("final order is not a permutation of the baseline");
        }
        let bpos = oracle::positions(&trace.baseline_order);
        let fpos = oracle::positions(&trace.final_order);
        for c in &trace.cards {
            if c.baseline_pos.abs_diff(c.final_pos) > budget
                || bpos.get(&c.card_id) != Some(&c.baseline_pos)
                || fpos.get(&c.card_id) != Some(&c.final_pos)
                || trace.displacements.get(&c.card_id) != Some(&(c.final_pos as i64 - c.baseline_pos as i64))
            {
                problems.push("displacement bound or position bookkeeping violated");
            }
        }
        if trace.max_displacement() > budget || (budget == 0 && trace.final_order != trace.baseline_order) {
            problems.push("max displacement exceeds budget");
        }
        if !problems.is_empty() {
            if violations == 0 {
                first = format!("trial {trial}: {}", problems[0]);
            }
            violations += 1;
        }
    }
    ensure!(violations == 0, "{violations} violating traces; {first}");

    let mut mismatches = 0;
    for trial in 0..1000 {
        let (cards, profile) = random_pool(&mut r, 4);
        let budget = r.random_range(0..=4);
        let arms = arm_sets.choose(&mut r).expect("non-empty");
        let trace = rank_feed(&cards, &profile, arms, &predictor, &random_params(&mut r), budget, demo_now())
            .map_err(|e| e.to_string())?;
        let mut by_base = trace.cards.clone();
        by_base.sort_by_key(|c| c.baseline_pos);
        let ucb: Vec<f64> = by_base.iter().map(|c| c.ucb).collect();
        let want: Vec<String> = oracle::best_budgeted_permutation(&ucb, budget)
            .into_iter()
            .map(|p| by_base[p].card_id.clone())
            .collect();
        if want != trace.final_order {
            mismatches += 1;
        }
        // tie-heavy scores straight into the slot filler
        let coarse: Vec<f64> = (0..4).map(|_| f64::from(r.random_range(0..3u8)) / 2.0).collect();
        let b = trial % 5;
        if budgeted_order(&coarse, b) != oracle::best_budgeted_permutation(&coarse, b) {
            mismatches += 1;
        }
    }
    ensure!(mismatches == 0, "{mismatches} of 2000 n=4 cases differ from the permutation oracle");
    Ok("100000 rank_feed calls, 0 violations; n=4 greedy equals exhaustive search on 2000 sets".into())
}

// 8 ------------------------------------------------------------------------

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-8 * b.abs().max(1.0)
}

pub fn bandit_correctness() -> Check {
    let mut r = rng(8);
    for trial in 0..500 {
        let d = r.random_range(1..=8);
        let k = r.random_range(1..=5);
        let alpha = r.random_range(0.0..3.0);
        let mut arms = BTreeMap::new();
        let mut dense = BTreeMap::new();
        for a in 0..k {
            let id = format!("arm{a}");
            let mut st = ArmState::new(id.as_str(), d);
            let mut o = oracle::DenseLinUcb::new(d);
            for _ in 0..r.random_range(0..60) {
                let x: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
                let rew: f64 = if r.random_bool(0.5) { r.random() } else { f64::from(u8::from(r.random_bool(0.5))) };
                st.update(&x, rew).map_err(|e| e.to_string())?;
                o.update(&x, rew);
            }
            let theta = st.theta().map_err(|e| e.to_string())?;
            let ot = o.theta();
            for i in 0..d {
                ensure!(close(theta[i], ot[i]), "trial {trial}: theta[{i}] {} vs oracle {}", theta[i], ot[i]);
                for j in 0..d {
                    ensure!(close(st.a[i * d + j], o.a[(i, j)]), "trial {trial}: A[{i},{j}] differs");
                }
            }
            arms.insert(id.clone(), st);
            dense.insert(id, o);
        }
        let contexts: BTreeMap<String, Vec<f64>> = arms
            .keys()
            .map(|id| (id.clone(), (0..d).map(|_| r.random_range(-1.0..1.0)).collect()))
            .collect();
        let sel = bandit_select(&contexts, &arms, alpha).map_err(|e| e.to_string())?;
        let want: BTreeMap<&String, f64> = contexts.iter().map(|(id, x)| (id, dense[id].ucb(x, alpha))).collect();
        for (id, p) in &sel.scores {
            ensure!(close(*p, want[id]), "trial {trial}: ucb of {id} {p} vs oracle {}", want[id]);
        }
        let top = want.values().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure!(close(want[&sel.arm_id], top), "trial {trial}: selected {} is not the oracle argmax", sel.arm_id);
        let exact_first = want.iter().find(|(_, v)| **v == top).map(|(id, _)| (*id).clone());
        if want.values().filter(|v| close(**v, top)).count() == 1 {
            ensure!(Some(&sel.arm_id) == exact_first.as_ref(), "trial {trial}: argmax mismatch");
        }
    }

    let env = LinearEnvironment::new(5, 5, 7);
    let report = simulate_bandit(&env, 10_000, 1.0, 11);
    ensure!(report.lift() >= 1.10, "LinUCB lift {:.3} below 1.10", report.lift());
    Ok(format!(
        "500 randomized arms match the dense inverse to 1e-8; lift {:.3} ({} vs {})",
        report.lift(),
        report.linucb_reward,
        report.random_reward
    ))
}

// 9 ------------------------------------------------------------------------

pub fn repetition_reduction() -> Check {
    let config = RepetitionConfig::default();
    ensure!(config.sessions == 1000, "simulation must run 1000 sessions");
    let run = |read_multiplier: f64| {
        let params = RankParams {
            rule: RuleParams {
                read_multiplier,
                ..RuleParams::default()
            },
            ..RankParams::default()
        };
        simulate_repetition(&config, &params, 13).reshow_fraction()
    };
    let (down, flat) = (run(0.2), run(1.0));
    let reduction = 1.0 - down / flat;
    ensure!(reduction >= 0.10, "relative reduction {:.1}% below 10%", reduction * 100.0);
    Ok(format!("re-show {down:.4} vs {flat:.4}, relative reduction {:.1}%", reduction * 100.0))
}

// 10 -----------------------------------------------------------------------

pub fn kappa_and_percentile() -> Check {
    let k = kappa_from_table([[20, 5], [10, 15]]).map_err(|e| e.to_string())?;
    ensure!(k == 0.4, "kappa {k} != 0.4");
    ensure!((oracle::kappa([[20, 5], [10, 15]]) - 0.4).abs() < 1e-12, "kappa oracle disagrees with hand value");
    let mut r = rng(10);
    let mut checked = 0;
    for set_no in 0..1000 {
        let n = r.random_range(1..=300);
        let samples: Vec<f64> = (0..n)
            .map(|_| if r.random_bool(0.2) { f64::from(r.random_range(0..5u8)) } else { r.random_range(0.0..20_000.0) })
            .collect();
        for p in [50u32, 90, 95, 99, 100] {
            let got = percentile(&samples, f64::from(p)).map_err(|e| e.to_string())?;
            let want = oracle::nearest_rank(&samples, p);
            ensure!(got == want, "set {set_no} p{p}: {got} vs sort oracle {want}");
            checked += 1;
        }
    }
    Ok(format!("kappa 0.4 exact; {checked} percentiles equal the sort oracle"))
}

// 11 -----------------------------------------------------------------------

/// Blocks exactly the texts starting with `!`.
struct MarkerGuard;

impl Guard for MarkerGuard {
    fn screen(&self, text: &str, _direction: Direction) -> GuardVerdict {
        if text.starts_with('!') {
            GuardVerdict::from_matches([groundpilot::guard::GuardCategory::PolicyOther].into(), vec!["marker".into()])
        } else {
            GuardVerdict::allow()
        }
    }
}

/// 49 benign requests and one injection, as `(component, query)`.
pub fn scripted_workload() -> Vec<(&'static str, &'static str)> {
    let mut w: Vec<(&str, &str)> = BENIGN.iter().cycle().take(49).copied().collect();
    w.insert(17, ("news_search", BLOCKED_QUERIES[0]));
    w
}

pub fn guard_pipeline() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = demo::write_config(dir.path()).map_err(|e| e.to_string())?;
    let state = AppState::open_with_clock(config.clone(), Arc::new(ManualClock::new(demo_now()))).map_err(|e| e.to_string())?;
    let workload = scripted_workload();
    for (c, q) in &workload {
        state
            .chat(&groundpilot::service::ChatRequest {
                user_id: "u001".into(),
                component_id: c.to_string(),
                query: q.to_string(),
            })
            .map_err(|e| e.to_string())?;
    }
    state.shutdown().map_err(|e| e.to_string())?;
    let metrics = parse_metrics(&state.metrics_text());
    let gauge = metrics.get("groundpilot_guard_rejection_rate").copied().ok_or("rejection gauge missing")?;
    let audit: Vec<groundpilot::router::AuditRecord> =
        groundpilot::jsonl::read_all(config.audit_path()).map_err(|e| e.to_string())?;
    ensure!(audit.len() == 50, "{} audit records for 50 requests", audit.len());
    let blocked_in = audit.iter().filter(|a| a.guard_input_verdict.as_ref().is_some_and(|v| v.is_block())).count();
    let blocked_out = audit
        .iter()
        .filter(|a| {
            a.guard_input_verdict.as_ref().is_some_and(|v| !v.is_block())
                && a.guard_output_verdict.as_ref().is_some_and(|v| v.is_block())
        })
        .count();
    ensure!((blocked_in, blocked_out) == (1, 0), "hand count {blocked_in} input + {blocked_out} output blocks");
    let hand = (blocked_in + blocked_out) as f64 / 50.0;
    ensure!(gauge == 0.02 && hand == 0.02, "gauge {gauge}, hand count {hand}");
    ensure!(chat_gauges(&audit).rejection_rate == gauge, "offline recomputation differs from the gauge");

    let rig = Rig::demo(RoutingPolicy::default());
    for (i, q) in BLOCKED_QUERIES.iter().enumerate() {
        for comp in ["news_search", "portfolio_analysis", "fx_brief"] {
            let before = (rig.retriever.call_count(), rig.internal.call_count(), rig.external.call_count());
            let inv = rig.orchestrator.invoke(&rig.request(i, "u001", comp, q)).map_err(|e| e.to_string())?;
            let after = (rig.retriever.call_count(), rig.internal.call_count(), rig.external.call_count());
            ensure!(before == after, "blocked `{q}` on {comp} moved call counters {before:?} -> {after:?}");
            ensure!(
                inv.response.outcome == Outcome::InputBlocked
                    && inv.response.fallback_used
                    && !inv.audit.generation_executed
                    && inv.audit.evidence_ids.is_empty(),
                "blocked `{q}` on {comp} was not short-circuited"
            );
        }
    }

    let mut r = rng(11);
    for set_no in 0..1000 {
        let n = r.random_range(1..=60);
        let skew = r.random::<f64>();
        let samples: Vec<LabeledSample> = (0..n)
            .map(|i| LabeledSample {
                text: format!("{}sample {i}", if r.random_bool(skew) { "!" } else { "" }),
                gold_positive: r.random_bool(1.0 - skew),
            })
            .collect();
        let predicted: Vec<bool> = samples.iter().map(|s| s.text.starts_with('!')).collect();
        let gold: Vec<bool> = samples.iter().map(|s| s.gold_positive).collect();
        let want = oracle::confusion(&predicted, &gold);
        let got = evaluate_f1(&MarkerGuard, &samples, Direction::Input).map_err(|e| e.to_string())?;
        let c = got.confusion;
        ensure!(
            (c.tp, c.fp, c.fn_, c.tn) == (want.tp, want.fp, want.fn_, want.tn),
            "set {set_no}: confusion {c:?} vs oracle {want:?}"
        );
        let (p, rc, f) = oracle::prf(want);
        ensure!(
            (got.precision - p).abs() < 1e-12 && (got.recall - rc).abs() < 1e-12 && (got.f1 - f).abs() < 1e-12,
            "set {set_no}: P/R/F1 {}/{}/{} vs oracle {p}/{rc}/{f}",
            got.precision,
            got.recall,
            got.f1
        );
    }
    Ok("rejection gauge 0.02 = hand count; blocked requests never reach retrieval or generation; F1 matches on 1000 sets".into())
}

// 12 -----------------------------------------------------------------------

pub mod http {
    use axum::body::{Body, Bytes};
    use axum::http::{Method, Request, StatusCode};
    use axum::Router;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    pub async fn call(app: &Router, method: Method, uri: &str, body: &str, key: Option<&str>) -> (StatusCode, Bytes) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(k) = key {
            req = req.header("idempotency-key", k);
        }
        let resp = app
            .clone()
            .oneshot(req.body(Body::from(body.to_string())).expect("request builds"))
            .await
            .expect("router is infallible");
        let status = resp.status();
        (status, resp.into_body().collect().await.expect("body reads").to_bytes())
    }
}

fn json<T: serde::de::DeserializeOwned>(b: &[u8]) -> Result<T, String> {
    serde_json::from_slice(b).map_err(|e| format!("{e}: {}", String::from_utf8_lossy(b)))
}

pub fn service_integration() -> Check {
    use axum::http::{Method, StatusCode};
    use http::call;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = demo::write_config(dir.path()).map_err(|e| e.to_string())?;
    let clock = Arc::new(ManualClock::new(demo_now()));

    let (snapshot, pulls_after) = runtime.block_on(async {
        let state = Arc::new(AppState::open_with_clock(config.clone(), clock.clone()).map_err(|e| e.to_string())?);
        let app = router(state.clone());

        let corpus = "{\"doc_id\":\"n900\",\"source_module\":\"news_retrieval\",\"text\":\"Hanwha Aerospace won a new export order. Shares rose 4 percent.\",\"published_at\":\"2025-01-10T08:00:00Z\"}\n\
                      {\"doc_id\":\"n901\",\"source_module\":\"news_retrieval\",\"text\":\"Samsung Electronics memory margins improved in the fourth quarter.\",\"published_at\":\"2025-01-10T08:30:00Z\"}\n";
        let (st, body) = call(&app, Method::POST, "/v1/ingest", corpus, None).await;
        ensure!(st == StatusCode::OK, "ingest returned {st}");
        let ingested: serde_json::Value = json(&body)?;
        ensure!(ingested["generation"] == 2, "ingest published generation {}", ingested["generation"]);

        let (st, body) = call(&app, Method::POST, "/v1/pregen", "", None).await;
        ensure!(st == StatusCode::OK, "pregen returned {st}");
        let report: serde_json::Value = json(&body)?;
        let emitted = report["users"].as_array().ok_or("pregen report has no users")?
            .iter()
            .map(|u| u["emitted"].as_u64().unwrap_or(0))
            .sum::<u64>();
        ensure!(emitted > 0, "pregen emitted nothing");

        let (st, body) = call(&app, Method::GET, "/v1/feed/u001?budget=2", "", None).await;
        ensure!(st == StatusCode::OK, "feed returned {st}");
        let feed1: FeedResponse = json(&body)?;
        ensure!(!feed1.items.is_empty(), "u001 feed is empty");
        let (_, trace1) = state.last_trace("u001").ok_or("no stored trace")?;
        let served: Vec<String> = feed1.items.iter().map(|i| i.card_id.clone()).collect();
        ensure!(served == trace1.final_order, "feed order differs from the stored trace");

        let card = &feed1.items[0];
        let arm = card.insight_type.as_str().to_string();
        let pulls0 = state.arms.pull_counts()[&arm];
        let fb = format!("{{\"user_id\":\"u001\",\"card_id\":\"{}\",\"event\":\"click\"}}", card.card_id);
        let (st, a1) = call(&app, Method::POST, "/v1/feedback", &fb, Some("key-1")).await;
        ensure!(st == StatusCode::OK, "feedback returned {st}");
        let (st, a2) = call(&app, Method::POST, "/v1/feedback", &fb, Some("key-1")).await;
        ensure!(st == StatusCode::OK, "duplicate feedback returned {st}");
        let (a1, a2): (serde_json::Value, serde_json::Value) = (json(&a1)?, json(&a2)?);
        ensure!(a1["duplicate"] == false && a2["duplicate"] == true && a1["offset"] == a2["offset"], "acks {a1} / {a2}");
        let pulls1 = state.arms.pull_counts()[&arm];
        ensure!(pulls1 == pulls0 + 1, "arm {arm} pulled {} times for one keyed event", pulls1 - pulls0);

        let (st, body) = call(&app, Method::GET, "/v1/feed/u001?budget=2", "", None).await;
        ensure!(st == StatusCode::OK, "second feed returned {st}");
        let feed2: FeedResponse = json(&body)?;
        let mut a: Vec<&str> = feed1.items.iter().map(|i| i.card_id.as_str()).collect();
        let mut b: Vec<&str> = feed2.items.iter().map(|i| i.card_id.as_str()).collect();
        a.sort_unstable();
        b.sort_unstable();
        ensure!(a == b, "second feed serves a different pool");
        ensure!(
            feed2.items.iter().all(|i| i.final_pos.abs_diff(i.baseline_pos) <= 2),
            "second feed breaks the trust budget"
        );

        // concurrent chat traffic, including 404 and 400 outcomes
        let mut tasks = tokio::task::JoinSet::new();
        for i in 0..40usize {
            let app = app.clone();
            let (c, q) = BENIGN[i % BENIGN.len()];
            let body = match i % 10 {
                7 => "{\"user_id\":\"u001\",\"component_id\":\"no_such_component\",\"query\":\"x\"}".to_string(),
                8 => "{not json".to_string(),
                _ => serde_json::json!({"user_id": "u001", "component_id": c, "query": q}).to_string(),
            };
            tasks.spawn(async move { call(&app, Method::POST, "/v1/chat", &body, None).await });
        }
        let mut ok_ids = BTreeSet::new();
        let mut statuses = BTreeMap::new();
        while let Some(res) = tasks.join_next().await {
            let (st, body) = res.map_err(|e| e.to_string())?;
            *statuses.entry(st.as_u16()).or_insert(0) += 1;
            if st == StatusCode::OK {
                let v: serde_json::Value = json(&body)?;
                ok_ids.insert(v["request_id"].as_str().unwrap_or_default().to_string());
            }
        }
        ensure!(statuses.get(&404) == Some(&4) && statuses.get(&400) == Some(&4), "statuses {statuses:?}");

        state.shutdown().map_err(|e| e.to_string())?;
        let audit: Vec<groundpilot::router::AuditRecord> =
            groundpilot::jsonl::read_all(config.audit_path()).map_err(|e| e.to_string())?;
        ensure!(audit.len() == 40, "{} audit records for 40 chat requests", audit.len());
        let audited: BTreeSet<String> = audit.iter().map(|a| a.request_id.clone()).collect();
        ensure!(audited.len() == 40, "duplicate request ids in the audit log");
        ensure!(ok_ids.is_subset(&audited), "a 200 response has no audit record");
        let events: Vec<serde_json::Value> = groundpilot::jsonl::read_all(config.events_path()).map_err(|e| e.to_string())?;
        ensure!(events.len() == 1, "{} feedback events logged for one keyed event", events.len());
        Ok::<_, String>((state.arms.to_snapshot(), pulls1))
    })?;

    // restart from disk
    let reopened = AppState::open_with_clock(config.clone(), clock.clone()).map_err(|e| e.to_string())?;
    let restored = reopened.arms.to_snapshot();
    ensure!(restored.arms.len() == snapshot.arms.len(), "arm count changed across restart");
    for (x, y) in snapshot.arms.iter().zip(&restored.arms) {
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        ensure!(
            x.arm_id == y.arm_id && x.pull_count == y.pull_count && bits(&x.a) == bits(&y.a) && bits(&x.b) == bits(&y.b),
            "arm {} differs after restart",
            x.arm_id
        );
    }
    let pool_card = {
        reopened.run_pregen_cycle();
        reopened.pool("u001").first().map(|c| c.card_id.clone()).ok_or("empty pool after restart")?
    };
    let replay = groundpilot::service::FeedbackRequest {
        user_id: "u001".into(),
        card_id: pool_card,
        event: "click".into(),
        dwell_ms: None,
    };
    let ack = reopened.feedback(&replay, Some("key-1")).map_err(|e| e.to_string())?;
    ensure!(ack.duplicate, "idempotency key forgotten across restart");
    ensure!(
        reopened.arms.pull_counts().values().sum::<u64>() == snapshot.arms.iter().map(|a| a.pull_count).sum::<u64>(),
        "replayed key updated an arm after restart"
    );
    Ok(format!(
        "ingest, pregen, feed, feedback, feed over HTTP; 40/40 chats audited; one update per key ({pulls_after} pulls); arms bitwise equal after restart"
    ))
}

/// Name, check and runtime bound in seconds.
pub type Criterion = (&'static str, fn() -> Check, Option<f64>);

/// Every criterion in order.
pub const ALL: [Criterion; 12] = [
    ("routing-score fidelity", routing_score_fidelity, Some(1.0)),
    ("zero PII egress", zero_pii_egress, Some(120.0)),
    ("routing determinism", routing_determinism, None),
    ("retrieval oracle equivalence", retrieval_oracle, Some(30.0)),
    ("fusion checks", fusion_checks, None),
    ("grounding metric", grounding_metric, None),
    ("trust budget", trust_budget, None),
    ("bandit correctness and learning", bandit_correctness, Some(60.0)),
    ("repetition reduction", repetition_reduction, None),
    ("kappa and percentile", kappa_and_percentile, None),
    ("guard pipeline", guard_pipeline, None),
    ("service integration", service_integration, None),
];
