// SPDX-License-Identifier: Apache-2.0

//! `groundpilot` command-line entry point.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use chrono::Utc;
use clap::{Parser, Subcommand};

use groundpilot::evalmetrics::{
    load_routing_cases, replay_evaluate, routing_score_batch, FixedArm, LinUcbPolicy, ReplayLog, ReplayPolicy,
    UniformRandom,
};
use groundpilot::guard::{evaluate_f1, parse_samples, Direction, RuleGuard};
use groundpilot::registry::{load_manifest, Manifest};
use groundpilot::retrieval::{load_corpus, HashingEmbedder, HybridIndex, HybridRetriever, Ontology, SearchScope};
use groundpilot::router::select_path;
use groundpilot::router::RoutingPolicy;
use groundpilot::service::{self, AppState, ChatRequest, ServiceConfig, ServiceError};

#[derive(Debug, Parser)]
#[command(name = "groundpilot", version, about = "Grounded, compliance-routed assistant backend")]
struct Cli {
    /// Service configuration file. Commands that need one fall back to the
    /// bundled demo dataset when it is absent.
    #[arg(long, global = true, env = "GROUNDPILOT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a component manifest and print its routing table.
    ValidateManifest {
        path: PathBuf,
        /// Require the full 20-component / 48-module catalog.
        #[arg(long)]
        strict: bool,
    },
    /// Invoke one component end to end and print the response.
    Route {
        #[arg(long)]
        component: String,
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "cli")]
        user: String,
    },
    /// Score a guard rule file against a labeled JSONL benchmark.
    EvalGuard {
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, value_enum, default_value = "input")]
        direction: DirectionArg,
    },
    /// Validate and index a corpus file.
    Ingest {
        corpus: PathBuf,
        /// Manifest that document modules must resolve in (defaults to the configured one).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Hybrid search over the configured corpus.
    Search {
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Restrict to these module ids.
        #[arg(long = "module")]
        modules: Vec<String>,
    },
    /// Pre-generate one user's insight cards.
    Pregen {
        #[arg(long)]
        user: String,
    },
    /// Pre-generate and rank one user's feed.
    Feed {
        #[arg(long)]
        user: String,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Routing score over a labeled case file.
    EvalRouting {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        /// Print every per-case score.
        #[arg(long)]
        per_case: bool,
    },
    /// Offline replay evaluation of a policy on a uniform-logged bandit log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// `uniform`, `linucb` or `fixed:<arm>`.
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "GROUNDPILOT_LISTEN")]
        listen: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum DirectionArg {
    Input,
    Output,
}

/// `println!` that ends the process quietly when stdout is a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            return Err(runtime(e));
        }
    }};
}

/// Error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn config(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, err: err.into() }
}

fn runtime(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, err: err.into() }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            err: e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.err));
            ExitCode::from(f.code)
        }
    }
}

/// The error and its causes, skipping causes already spelled out in the
/// message above them.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Failure> {
    out!("{}", serde_json::to_string_pretty(v).map_err(runtime)?);
    Ok(())
}

fn service_config(path: Option<&Path>) -> Result<ServiceConfig, Failure> {
    match path {
        Some(p) => Ok(ServiceConfig::load(p)?),
        None => {
            let dir = std::env::temp_dir().join(format!("groundpilot-demo-{}", std::process::id()));
            eprintln!("no --config given; using the bundled demo dataset in {}", dir.display());
            Ok(groundpilot::demo::write_config(&dir)?)
        }
    }
}

fn open_state(path: Option<&Path>) -> Result<AppState, Failure> {
    Ok(AppState::open(service_config(path)?)?)
}

fn load_inputs(cfg: &ServiceConfig) -> Result<(Manifest, Ontology), Failure> {
    let manifest = load_manifest(&cfg.manifest, cfg.strict_manifest).map_err(config)?;
    let ontology = match &cfg.ontology {
        Some(p) => Ontology::from_json_str(&std::fs::read_to_string(p).with_context(|| p.display().to_string()).map_err(config)?)
            .with_context(|| p.display().to_string())
            .map_err(config)?,
        None => Ontology::default(),
    };
    Ok((manifest, ontology))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::ValidateManifest { path, strict } => {
            let m = load_manifest(&path, strict).map_err(config)?;
            out!("manifest {} ({})", path.display(), m.content_hash());
            out!(
                "{} components, {} modules, {} PII modules",
                m.components().len(),
                m.modules().len(),
                m.pii_modules().len()
            );
            let policy = RoutingPolicy::default();
            for c in m.components() {
                out!(
                    "  {:<24} {:<8} {:<15} {}",
                    c.id,
                    c.sensitivity.to_string(),
                    format!("{:?}", c.category),
                    select_path(c, &policy)
                );
            }
        }
        Command::Route { component, query, user } => {
            let state = open_state(cfg_path)?;
            let result = state.chat(&ChatRequest {
                user_id: user,
                component_id: component,
                query,
            });
            state.shutdown()?;
            match result {
                Ok(r) => print_json(&r)?,
                Err(service::ApiError::NotFound(m)) => return Err(config(anyhow!(m))),
                Err(e) => return Err(runtime(e)),
            }
        }
        Command::EvalGuard {
            rules,
            samples,
            direction,
        } => {
            let guard = match rules {
                Some(p) => RuleGuard::from_file(&p).map_err(config)?,
                None => RuleGuard::default_rules(),
            };
            let text = std::fs::read_to_string(&samples)
                .with_context(|| samples.display().to_string())
                .map_err(config)?;
            let samples = parse_samples(&text).map_err(config)?;
            let dir = match direction {
                DirectionArg::Input => Direction::Input,
                DirectionArg::Output => Direction::Output,
            };
            let r = evaluate_f1(&guard, &samples, dir).map_err(config)?;
            out!("samples   {}", samples.len());
            out!("tp {} fp {} fn {} tn {}", r.confusion.tp, r.confusion.fp, r.confusion.fn_, r.confusion.tn);
            out!("precision {:.4}", r.precision);
            out!("recall    {:.4}", r.recall);
            out!("f1        {:.4}", r.f1);
        }
        Command::Ingest { corpus, manifest } => {
            let manifest = match manifest {
                Some(p) => load_manifest(&p, false).map_err(config)?,
                None => load_inputs(&service_config(cfg_path)?)?.0,
            };
            let docs = load_corpus(&corpus, Some(&manifest)).map_err(config)?;
            let index = HybridIndex::new(Arc::new(HashingEmbedder::default()));
            let generation = index.refresh(docs).map_err(config)?;
            out!(
                "indexed {} documents as {} passages (generation {})",
                generation.len(),
                generation.passage_count(),
                generation.generation()
            );
        }
        Command::Search { query, k, modules } => {
            let cfg = service_config(cfg_path)?;
            let (manifest, ontology) = load_inputs(&cfg)?;
            let docs = load_corpus(&cfg.corpus, Some(&manifest)).map_err(config)?;
            let index = Arc::new(HybridIndex::new(Arc::new(HashingEmbedder::default())));
            index.refresh(docs).map_err(config)?;
            let mut rc = cfg.retrieval;
            rc.fused_k = k;
            let retriever = HybridRetriever::new(index, ontology, rc);
            let scope = if modules.is_empty() {
                SearchScope::all()
            } else {
                SearchScope::modules(modules)
            };
            let result = retriever.retrieve(&query, Utc::now().date_naive(), &scope).map_err(runtime)?;
            for p in &result.passages {
                out!(
                    "{:>2}. [{}] {} fused={:.5} bm25={:.4} cos={:.4}",
                    p.fused_rank, p.passage_id, p.source_module, p.fused_score, p.sparse_score, p.dense_score
                );
                out!("    {}", p.passage_text);
            }
        }
        Command::Pregen { user } => {
            let state = open_state(cfg_path)?;
            let out = state.pregen_user(&user).map_err(|e| match e {
                service::ApiError::NotFound(_) => config(e),
                _ => runtime(e),
            })?;
            state.shutdown()?;
            print_json(&out)?;
        }
        Command::Feed { user, budget } => {
            let state = open_state(cfg_path)?;
            state.run_pregen_cycle();
            let feed = state.feed(&user, budget).map_err(|e| match e {
                service::ApiError::NotFound(_) => config(e),
                _ => runtime(e),
            })?;
            state.shutdown()?;
            print_json(&feed)?;
        }
        Command::EvalRouting {
            cases,
            alpha,
            beta,
            per_case,
        } => {
            let cases = load_routing_cases(&cases).map_err(config)?;
            let batch = routing_score_batch(&cases, alpha, beta).map_err(config)?;
            if per_case {
                for (c, s) in cases.iter().zip(&batch.scores) {
                    out!("{s:.6}\t{}", c.query);
                }
            }
            out!("cases {}", cases.len());
            out!("mean  {:.6}", batch.mean);
            out!("sum   {:.6}", batch.sum);
        }
        Command::Replay {
            log,
            policy,
            alpha,
            seed,
        } => {
            let log = ReplayLog::load(&log).map_err(config)?;
            let mut p: Box<dyn ReplayPolicy> = match policy.as_str() {
                "uniform" => Box::new(UniformRandom::new(seed)),
                "linucb" => Box::new(LinUcbPolicy::new(&log.header.arms, log.header.dimension, alpha)),
                other => match other.strip_prefix("fixed:") {
                    Some(arm) => Box::new(FixedArm(arm.to_string())),
                    None => return Err(config(anyhow!("unknown policy `{other}`; use uniform, linucb or fixed:<arm>"))),
                },
            };
            let r = replay_evaluate(&log, p.as_mut()).map_err(config)?;
            out!("policy    {}", r.policy);
            out!("events    {}", r.events);
            out!("matched   {}", r.matched);
            match (r.estimate, r.std_error) {
                (Some(e), Some(se)) => out!("estimate  {e:.6} ± {se:.6}"),
                (Some(e), None) => out!("estimate  {e:.6}"),
                _ => out!("estimate  undefined (no matched events)"),
            }
        }
        Command::Serve { listen } => {
            let mut cfg = match cfg_path {
                Some(p) => ServiceConfig::load(p)?,
                None => return Err(config(anyhow!("serve needs --config or GROUNDPILOT_CONFIG"))),
            };
            if let Some(l) = listen {
                cfg.listen = l;
            }
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&cfg.listen)
                    .await
                    .with_context(|| format!("binding {}", cfg.listen))
                    .map_err(config)?;
                let state = Arc::new(AppState::open(cfg)?);
                service::serve(state, listener, service::shutdown_signal()).await?;
                Ok::<(), Failure>(())
            })?;
        }
    }
    Ok(())
}
