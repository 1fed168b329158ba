use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cppscope_core::config::{load_tests_manifest, Config};
use cppscope_core::index::{build_index_with, check_fresh, load_container, persist_container, IndexContainer};
use cppscope_core::intent::{build_intent_index_with, doc_counts, CommandProvider, EmbeddingProvider, HashingProvider};
use cppscope_core::pipeline::{run_pipeline, AgentBackend, Backends, PipelineInput, Stage};
use cppscope_core::protocol::{dispatch, serve, ResponseStatus, ToolContext, ToolRequest};
use cppscope_core::{load_repository, Execution, IssueDescription};
use serde_json::{Map, Value};

mod fixture;

const EXIT_INPUT: u8 = 2;
const EXIT_REPRODUCTION: u8 = 3;
const EXIT_GENERATION: u8 = 4;
const EXIT_SELECTION: u8 = 5;

#[derive(Parser)]
#[command(name = "cppscope", version, about = "Structural and intent indexing of C++ repositories")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run every data-parallel stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the structural and intent indices and write them to a file.
    Index(IndexArgs),
    /// Run one tool request against an index file.
    Query(QueryArgs),
    /// Answer line-delimited tool requests on stdin.
    Serve(ServeArgs),
    /// Reproduce, generate and select a patch for an issue.
    Pipeline(PipelineArgs),
    /// File- and function-level localization rates over a fixture.
    EvalLoc(EvalArgs),
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    root: PathBuf,
    /// Include glob; repeatable, comma-separated lists allowed.
    #[arg(long = "include")]
    include: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// Repository the index was built from; warns when it has changed.
    #[arg(long)]
    root: Option<PathBuf>,
    /// Tool name, e.g. FindClass.
    tool: String,
    /// `key=value`; values that parse as JSON are passed as JSON.
    #[arg(long = "arg", value_name = "KEY=VALUE")]
    args: Vec<String>,
    /// Request id echoed in the response.
    #[arg(long, default_value = "cli")]
    id: String,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    index: PathBuf,
    /// Repository the index was built from; warns when it has changed.
    #[arg(long)]
    root: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    issue: PathBuf,
    /// `[[test]]` manifest.
    #[arg(long)]
    tests: PathBuf,
    /// Reproducer backend: a transcript file, or `exec:<command>`.
    #[arg(long)]
    reproducer: Option<String>,
    /// Patch backend: a transcript file, or `exec:<command>`.
    #[arg(long)]
    patcher: Option<String>,
    /// Optional judge backend for vote scoring.
    #[arg(long)]
    judge: Option<String>,
    /// Include globs for the repository snapshot (default: every file).
    #[arg(long = "include")]
    include: Vec<String>,
    /// Write the selected diff here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the full JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON fixture of instances.
    fixture: PathBuf,
}

fn provider_for(cfg: &Config) -> Box<dyn EmbeddingProvider> {
    match &cfg.embedding.endpoint {
        Some(cmd) => Box::new(CommandProvider::new(cfg.embedding.provider_id.clone(), cmd.clone())),
        None => Box::new(HashingProvider),
    }
}

fn exec_of(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn cmd_index(cli: &Cli, cfg: &Config, a: &IndexArgs) -> Result<u8> {
    let (repo, skipped) = load_repository(&a.root, &a.include)?;
    for s in &skipped {
        log::warn!("skipped {}: {}", s.path, s.reason);
    }
    let exec = exec_of(cli);
    let structural = build_index_with(&repo, exec);
    let provider = provider_for(cfg);
    let intent = match build_intent_index_with(&repo, &structural, provider.as_ref(), &cfg.retrieval.granularities, exec)
    {
        Ok(i) => Some(i),
        Err(e) => {
            log::warn!("intent index not built: {e}");
            None
        }
    };
    let docs = intent.as_ref().map_or(0, |i| i.docs.len());
    let per_granularity = intent.as_ref().map(doc_counts).unwrap_or_default();
    let container = IndexContainer { structural, intent };
    persist_container(&container, &a.out)?;
    let s = &container.structural;
    let summary = serde_json::json!({
        "files": s.files.len(),
        "symbols": s.symbols.len(),
        "edges": s.edges.len(),
        "docs": docs,
        "docs_by_granularity": per_granularity,
        "parse_errors": s.parse_error_total(),
        "skipped": skipped.len(),
        "out": a.out.display().to_string(),
    });
    println!("{summary}");
    Ok(0)
}

fn parse_kv(raw: &[String]) -> Result<Map<String, Value>> {
    let mut args = Map::new();
    for kv in raw {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("argument {kv:?} is not KEY=VALUE");
        };
        let value = serde_json::from_str::<Value>(v).unwrap_or_else(|_| Value::String(v.to_string()));
        args.insert(k.to_string(), value);
    }
    Ok(args)
}

fn load_index_file(path: &Path, root: Option<&Path>) -> Result<IndexContainer> {
    let container = load_container(path).with_context(|| format!("loading index {}", path.display()))?;
    if let Some(root) = root {
        let (repo, _) = load_repository(root, &[])?;
        if let Err(e) = check_fresh(&container.structural, &repo) {
            log::warn!("{e}");
        }
    }
    Ok(container)
}

fn cmd_query(cfg: &Config, a: &QueryArgs) -> Result<u8> {
    let container = load_index_file(&a.index, a.root.as_deref())?;
    let provider = provider_for(cfg);
    let mut ctx = ToolContext::new(&container.structural, container.intent.as_ref(), provider.as_ref());
    ctx.default_k = cfg.retrieval.k;
    ctx.default_hop_limit = cfg.retrieval.hop_limit;
    let request = ToolRequest {
        request_id: a.id.clone(),
        tool: a.tool.clone(),
        args: parse_kv(&a.args)?,
    };
    let response = dispatch(&ctx, &request);
    println!("{}", response.to_line());
    Ok(if response.status == ResponseStatus::Ok { 0 } else { EXIT_INPUT })
}

fn cmd_serve(cfg: &Config, a: &ServeArgs) -> Result<u8> {
    let container = load_index_file(&a.index, a.root.as_deref())?;
    let provider = provider_for(cfg);
    let mut ctx = ToolContext::new(&container.structural, container.intent.as_ref(), provider.as_ref());
    ctx.default_k = cfg.retrieval.k;
    ctx.default_hop_limit = cfg.retrieval.hop_limit;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let stats = serve(&ctx, stdin.lock(), BufWriter::new(stdout.lock()))?;
    log::info!("served {} requests ({} errors)", stats.requests, stats.errors);
    Ok(0)
}

fn backend(role: &str, spec: Option<&str>, budget: usize) -> Result<Option<AgentBackend>> {
    let Some(spec) = spec else { return Ok(None) };
    let b = match spec.strip_prefix("exec:") {
        Some(cmd) => AgentBackend::external(role, cmd, budget)?,
        None => AgentBackend::from_transcript_file(role, Path::new(spec), budget)?,
    };
    Ok(Some(b))
}

fn cmd_pipeline(cli: &Cli, cfg: &Config, a: &PipelineArgs) -> Result<u8> {
    let include = if a.include.is_empty() {
        vec!["**/*".to_string()]
    } else {
        a.include.clone()
    };
    let (repo, skipped) = load_repository(&a.repo, &include)?;
    for s in &skipped {
        log::warn!("skipped {}: {}", s.path, s.reason);
    }
    let issue_text =
        std::fs::read_to_string(&a.issue).with_context(|| format!("reading issue {}", a.issue.display()))?;
    let issue = IssueDescription::from_text(&issue_text);
    let tests = load_tests_manifest(&a.tests, &cfg.runner)?;
    let mut backends = Backends {
        reproducer: backend("reproducer", a.reproducer.as_deref(), cfg.agents.reproducer_turns)?,
        patcher: backend("patcher", a.patcher.as_deref(), cfg.agents.patcher_turns)?,
        judge: backend("judge", a.judge.as_deref(), cfg.agents.judge_turns)?,
    };
    let provider = provider_for(cfg);
    let input = PipelineInput {
        repo: &repo,
        issue: &issue,
        tests: &tests,
        config: cfg,
        provider: provider.as_ref(),
        exec: exec_of(cli),
    };
    let report = run_pipeline(&input, &mut backends);
    if let Some(path) = &a.report {
        let body = serde_json::to_string_pretty(&report)?;
        std::fs::write(path, body).with_context(|| format!("writing report {}", path.display()))?;
    }
    if let Some(f) = &report.failure {
        println!("FAILURE ({}): {}", f.stage, f.reason);
        return Ok(match f.stage {
            Stage::Reproduction => EXIT_REPRODUCTION,
            Stage::Generation => EXIT_GENERATION,
            Stage::Selection => EXIT_SELECTION,
        });
    }
    let patch = report.final_patch.as_ref().expect("no failure means a patch was selected");
    if let Some(path) = &a.out {
        std::fs::write(path, &patch.diff).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut out = std::io::stdout().lock();
    out.write_all(patch.diff.as_bytes())?;
    Ok(0)
}

fn cmd_eval(cli: &Cli, cfg: &Config, a: &EvalArgs) -> Result<u8> {
    let provider = provider_for(cfg);
    let summary = fixture::evaluate_fixture(&a.fixture, cfg, provider.as_ref(), exec_of(cli))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Index(a) => cmd_index(cli, &cfg, a),
        Command::Query(a) => cmd_query(&cfg, a),
        Command::Serve(a) => cmd_serve(&cfg, a),
        Command::Pipeline(a) => cmd_pipeline(cli, &cfg, a),
        Command::EvalLoc(a) => cmd_eval(cli, &cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
