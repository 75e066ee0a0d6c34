//! Command-line entry points.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use codhy_core::evaluation::{bundled_scenarios, load_scenarios, replay, run_scenarios, write_experiment, MetricsRow};
use codhy_core::ingestion::{RunConfig, Variant};
use codhy_core::pipeline::{Engine, GraphSummary, PipelineError, RunObserver, Stage};

use crate::api::{app, AppState};
use crate::manager::{ManagerConfig, RunManager};
use crate::setup::{EngineOptions, CACHE_DIR_ENV, FIXTURE_DIR_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "codhy", version, about = "Biomarker-guided drug-combination hypothesis engine")]
pub struct Cli {
    /// Offline fixture directory (adapters/, literature.jsonl, synergy.csv).
    #[arg(long, global = true, env = FIXTURE_DIR_ENV)]
    pub fixtures: Option<PathBuf>,
    /// Persistent graph and embedding cache.
    #[arg(long, global = true, env = CACHE_DIR_ENV)]
    pub cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline once and write the report.
    Run(RunArgs),
    /// Run every scenario under each variant and write logs plus metrics.
    Eval(EvalArgs),
    /// Recompute metrics from a directory of stored run logs.
    Replay {
        /// Directory holding runs/*.json.
        logs: PathBuf,
    },
    /// Manage the graph cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// Delete every cached graph and embedding table.
    Clear,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub biomarker: String,
    #[arg(long)]
    pub cancer: String,
    #[arg(long, default_value_t = 50)]
    pub abstracts: usize,
    #[arg(long, default_value_t = 4)]
    pub hypotheses: usize,
    #[arg(long, default_value = "mock")]
    pub provider: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// full, no_embeddings or llm_only.
    #[arg(long, default_value = "full")]
    pub variant: String,
    /// Comma-separated curated source ids.
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<String>>,
    /// Report path; the JSON goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scenario TSV (biomarker, cancer type); the bundled list when omitted.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "full,no_embeddings,llm_only")]
    pub variants: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub abstracts: usize,
    #[arg(long, default_value_t = 4)]
    pub hypotheses: usize,
    #[arg(long, default_value = "mock")]
    pub provider: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
    #[arg(long, default_value_t = 16)]
    pub queue: usize,
    /// Built web UI assets to serve at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let opts = EngineOptions {
        fixture_dir: cli.fixtures,
        cache_dir: cli.cache_dir,
    };
    match cli.command {
        Command::Run(args) => with_engine(&opts, |e| cmd_run(e, args)),
        Command::Eval(args) => with_engine(&opts, |e| cmd_eval(e, args)),
        Command::Replay { logs } => cmd_replay(&logs),
        Command::Cache { action: CacheAction::Clear } => cmd_cache_clear(&opts),
        Command::Serve(args) => with_engine(&opts, |e| cmd_serve(e, args)),
    }
}

fn with_engine(opts: &EngineOptions, f: impl FnOnce(Engine) -> i32) -> i32 {
    match opts.build() {
        Ok(engine) => f(engine),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PIPELINE
        }
    }
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| {
        let known: Vec<&str> = Variant::ALL.iter().map(|v| v.as_str()).collect();
        format!("unknown variant '{s}' (expected one of {})", known.join(", "))
    })
}

fn report_errors(err: &PipelineError) -> i32 {
    match err {
        PipelineError::Validation(fields) => {
            eprintln!("invalid run configuration:");
            for f in fields {
                eprintln!("  {f}");
            }
            EXIT_VALIDATION
        }
        other => {
            eprintln!("error: {other}");
            EXIT_PIPELINE
        }
    }
}

struct StderrProgress;

impl RunObserver for StderrProgress {
    fn stage(&mut self, stage: Stage) {
        tracing::info!(?stage, progress = stage.progress(), "stage");
    }

    fn graph_ready(&mut self, s: &GraphSummary) {
        tracing::info!(entities = s.entities, relations = s.relations, cache_hit = s.cache_hit, "graph ready");
    }
}

fn cmd_run(engine: Engine, args: RunArgs) -> i32 {
    let variant = match parse_variant(&args.variant) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("invalid run configuration:\n  variant: {msg}");
            return EXIT_VALIDATION;
        }
    };
    let mut config = RunConfig::new(&args.biomarker, &args.cancer);
    config.n_abstracts = args.abstracts;
    config.n_hypotheses = args.hypotheses;
    config.provider_id = args.provider;
    config.seed = args.seed;
    config.variant = variant;
    if let Some(sources) = args.sources {
        config.source_set = sources;
    }
    let out = match engine.run(&config, &mut StderrProgress) {
        Ok(out) => out,
        Err(e) => return report_errors(&e),
    };
    for d in &out.report.degraded_sources {
        eprintln!("warning: source '{}' degraded: {}", d.source_id, d.error);
    }
    let bytes = out.report.to_canonical_json();
    match &args.out {
        Some(path) => {
            if let Err(e) = write_file(path, &bytes) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_PIPELINE;
            }
            print!("{}", out.report.render_text());
        }
        None => {
            use std::io::Write;
            let _ = std::io::stdout().write_all(&bytes);
        }
    }
    EXIT_OK
}

fn write_file(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)
}

fn print_rows(rows: &[MetricsRow]) {
    println!(
        "{:<14} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "variant", "runs", "novel_ex", "novel_ctx", "coverage", "proc@1", "proc@3", "diversity", "mrr", "ndcg@3"
    );
    for r in rows {
        println!(
            "{:<14} {:>2}/{:<2} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            r.variant.as_str(),
            r.completed,
            r.scenario_count,
            r.novel_exact_rate,
            r.novel_context_rate,
            r.evidence_coverage,
            r.proceed_at_1,
            r.proceed_at_3,
            r.diversity,
            r.mrr,
            r.ndcg_at_3
        );
        if !r.complete {
            eprintln!("warning: {} completed {} of {} scenarios", r.variant, r.completed, r.scenario_count);
        }
    }
}

fn cmd_eval(engine: Engine, args: EvalArgs) -> i32 {
    let mut variants = Vec::new();
    for v in &args.variants {
        match parse_variant(v) {
            Ok(v) if !variants.contains(&v) => variants.push(v),
            Ok(_) => {}
            Err(msg) => {
                eprintln!("invalid evaluation configuration:\n  variants: {msg}");
                return EXIT_VALIDATION;
            }
        }
    }
    let scenarios = match &args.scenarios {
        Some(path) => match load_scenarios(path) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("invalid evaluation configuration:\n  scenarios: {e}");
                return EXIT_VALIDATION;
            }
        },
        None => bundled_scenarios(),
    };
    let mut base = RunConfig::new("-", "-");
    base.n_abstracts = args.abstracts;
    base.n_hypotheses = args.hypotheses;
    base.provider_id = args.provider;
    base.seed = args.seed;
    if let Err(e) = engine.validate(&base) {
        return report_errors(&e);
    }
    let exp = run_scenarios(&engine, &scenarios, &variants, &base);
    for log in exp.logs.iter().filter(|l| l.error.is_some()) {
        eprintln!(
            "warning: {} / {} ({}) failed: {}",
            log.scenario.biomarker,
            log.scenario.cancer_type,
            log.variant,
            log.error.as_deref().unwrap_or_default()
        );
    }
    if let Err(e) = write_experiment(&exp, &args.out) {
        eprintln!("error: {e}");
        return EXIT_PIPELINE;
    }
    print_rows(&exp.rows);
    EXIT_OK
}

fn cmd_replay(logs: &Path) -> i32 {
    match replay(logs) {
        Ok(rows) => {
            print_rows(&rows);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PIPELINE
        }
    }
}

fn cmd_cache_clear(opts: &EngineOptions) -> i32 {
    let Some(dir) = &opts.cache_dir else {
        eprintln!("error: no cache directory configured (set --cache-dir or {CACHE_DIR_ENV})");
        return EXIT_VALIDATION;
    };
    if !dir.exists() {
        println!("removed 0 cache files");
        return EXIT_OK;
    }
    let cache = match codhy_core::kg::cache::GraphCache::with_dir(dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            return EXIT_PIPELINE;
        }
    };
    match cache.clear() {
        Ok(n) => {
            println!("removed {n} cache files");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            EXIT_PIPELINE
        }
    }
}

fn cmd_serve(engine: Engine, args: ServeArgs) -> i32 {
    let manager = RunManager::new(
        Arc::new(engine),
        ManagerConfig {
            workers: args.workers,
            queue_capacity: args.queue,
            retry_after: Duration::from_secs(5),
        },
    );
    let router = app(Arc::new(AppState::new(manager)), args.static_dir);
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_PIPELINE;
        }
    };
    let served = rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    match served {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PIPELINE
        }
    }
}
