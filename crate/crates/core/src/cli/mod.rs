//! Command-line pipeline: node generation, connection discovery, synthesis,
//! agent runs, evaluation and utilities.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 backend
//! failure, 4 empty result, 5 data mismatch, 1 anything else.

mod config;

pub use config::{
    BackendSettings, ExecutorSettings, PipelineConfig, ScorerSettings, ToolBinding, DEFAULT_SEED,
    DEFAULT_SPLIT,
};

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::aen::{
    construct_trajectories, discover_connections, filter_trajectories, generate_aen, split_dataset,
    AenError, ConstructionReport,
};
use crate::cluster::{cluster_tools, count_cooccurrence};
use crate::metrics::{evaluate_dataset, EvalParams, MetricError};
use crate::model::{read_jsonl, write_jsonl, AenNode, JsonlError, MetaTrajectory, Validate};
use crate::modulation::{overhead_estimate, parameter_stats};
use crate::orchestrator::{ExecContext, Orchestrator, OrchestratorError, RunInput, RunRecord};
use crate::react::{action_sequence, final_answer, parse_transcript};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("empty result: {0}")]
    Empty(String),
    #[error("data mismatch: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Empty(_) => 4,
            CliError::Mismatch(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl From<AenError> for CliError {
    fn from(e: AenError) -> Self {
        match e {
            AenError::Backend(b) => CliError::Backend(b.to_string()),
            AenError::InvalidParams { .. } | AenError::BadRatios(_) => {
                CliError::Config(e.to_string())
            }
            AenError::DuplicateNodeId(_)
            | AenError::UnknownNode(_)
            | AenError::InsufficientNodes(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Backend(b) => CliError::Backend(b.to_string()),
            OrchestratorError::LeakDetected(_) => CliError::Other(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::ShapeMismatch { .. } => CliError::Mismatch(e.to_string()),
            MetricError::Backend(b) => CliError::Backend(b.to_string()),
            other => CliError::Backend(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "trajkit",
    version,
    about = "Trajectory synthesis and evaluation for tool-calling agents"
)]
pub struct Cli {
    /// Pipeline configuration (JSON). Flags override file values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice in this invocation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one atomic execution node per query.
    Generate(GenerateArgs),
    /// Score node pairs and write the kept connections.
    Connect(ConnectArgs),
    /// Discover connections, build, filter and split trajectories.
    Synthesize(SynthesizeArgs),
    /// Run the planner/component agents on queries.
    Run(RunArgs),
    /// Aggregate metrics over agent runs.
    Evaluate(EvaluateArgs),
    /// Split a ReACT transcript into segments.
    Parse(ParseArgs),
    /// Print adapter parameter counts and compute overhead.
    AdapterStats(AdapterStatsArgs),
    /// Group tools into component agents by co-occurrence.
    Cluster(ClusterArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// One query per line, or JSONL objects with `query`, `id`, `image`.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct ConnectionFlags {
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub max_pairs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConnectArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub connection: ConnectionFlags,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    /// Directory for train/validation/test JSONL and report.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub connection: ConnectionFlags,
    #[arg(long)]
    pub max_usage: Option<usize>,
    #[arg(long)]
    pub max_length: Option<usize>,
    /// Train:validation:test percentages, e.g. 85:5:10.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<[u32; 3]>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// A single query.
    #[arg(long, conflicts_with = "queries", required_unless_present = "queries")]
    pub query: Option<String>,
    /// One query per line, or JSONL objects with `query`, `id`, `image`.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Image for `--query`.
    #[arg(long, requires = "query")]
    pub image: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub runs: PathBuf,
    /// Reference trajectories keyed by sample id.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Score answers with the configured backend as judge.
    #[arg(long)]
    pub judge: bool,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_TRR_THETA)]
    pub trr_theta: f64,
    /// Machine-readable report; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub transcript: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdapterStatsArgs {
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub layers: u64,
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub ffn_mult: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub lora_rank: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..))]
    pub seq_len: u64,
    #[arg(long, default_value_t = 512)]
    pub text_len: u64,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Minimum average linkage for a merge.
    #[arg(long, default_value_t = 0.1)]
    pub min_link: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_split(s: &str) -> Result<[u32; 3], String> {
    let parts: Vec<u32> = s
        .split(':')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let ratios: [u32; 3] = parts
        .try_into()
        .map_err(|_| "expected three ratios like 85:5:10".to_string())?;
    if ratios.iter().sum::<u32>() != 100 {
        return Err(format!("{s} does not sum to 100"));
    }
    Ok(ratios)
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = PipelineConfig::load_or_default(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.connection.seed = config.seed;
    match cli.command {
        Command::Generate(a) => cmd_generate(&config, &a),
        Command::Connect(a) => cmd_connect(config, &a),
        Command::Synthesize(a) => cmd_synthesize(config, &a),
        Command::Run(a) => cmd_run(config, &a),
        Command::Evaluate(a) => cmd_evaluate(&config, &a),
        Command::Parse(a) => cmd_parse(&a),
        Command::AdapterStats(a) => cmd_adapter_stats(&a),
        Command::Cluster(a) => cmd_cluster(&a),
    }
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn output_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Other(format!("{}: {e}", path.display()))
}

fn read_records<T: serde::de::DeserializeOwned + Validate>(
    path: &Path,
) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| input_err(path, e))?;
    read_jsonl(BufReader::new(file)).map_err(|e: JsonlError| input_err(path, e))
}

fn write_records<T: Serialize + Validate>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    let mut sink = BufWriter::new(file);
    write_jsonl(records, &mut sink).map_err(|e| output_err(path, e))?;
    sink.flush().map_err(|e| output_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| output_err(path, e))
}

/// A query line: plain text or a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
struct QueryLine {
    #[serde(alias = "sample_id")]
    id: Option<String>,
    query: String,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    extra: BTreeMap<String, Value>,
}

fn read_queries(path: &Path) -> Result<Vec<QueryLine>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            if line.trim_start().starts_with('{') {
                serde_json::from_str(line)
                    .map_err(|e| input_err(path, format!("line {}: {e}", i + 1)))
            } else {
                Ok(QueryLine {
                    query: line.trim().to_string(),
                    ..QueryLine::default()
                })
            }
        })
        .collect()
}

fn cmd_generate(config: &PipelineConfig, args: &GenerateArgs) -> Result<(), CliError> {
    config.validate()?;
    let queries = read_queries(&args.queries)?;
    let backend = config.backend()?;
    let registry = config.registry()?;
    let ctx = ExecContext::new(config.limits.clone(), config.clock());
    let mut nodes = Vec::with_capacity(queries.len());
    let mut failed_tools = 0usize;
    for (i, q) in queries.iter().enumerate() {
        let id = q.id.clone().unwrap_or_else(|| format!("aen-{i:05}"));
        let node = match generate_aen(
            &id,
            &q.query,
            q.image.as_deref(),
            backend.as_ref(),
            &registry,
            &ctx,
        ) {
            Ok(node) => node,
            Err(AenError::MalformedProposal(msg)) => {
                warn!("{id}: malformed proposal skipped: {msg}");
                failed_tools += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if node.extra.get("tool_success") == Some(&Value::Bool(false)) {
            failed_tools += 1;
        }
        nodes.push(node);
    }
    eprintln!(
        "generated {} node(s) from {} quer{}, {failed_tools} failure(s)",
        nodes.len(),
        queries.len(),
        if queries.len() == 1 { "y" } else { "ies" }
    );
    write_records(&args.out, &nodes)
}

fn apply_connection_flags(config: &mut PipelineConfig, flags: &ConnectionFlags) {
    if let Some(t) = flags.theta {
        config.connection.theta = t;
    }
    if let Some(m) = flags.max_pairs {
        config.connection.max_pairs = m;
    }
}

fn cmd_connect(mut config: PipelineConfig, args: &ConnectArgs) -> Result<(), CliError> {
    apply_connection_flags(&mut config, &args.connection);
    config.validate()?;
    let nodes: Vec<AenNode> = read_records(&args.nodes)?;
    let scorer = config.scorer(config.backend()?);
    let discovery = discover_connections(&nodes, &config.connection, scorer.as_ref())?;
    eprintln!(
        "evaluated {} pair(s), kept {} connection(s)",
        discovery.pairs_evaluated,
        discovery.connections.len()
    );
    write_records(&args.out, &discovery.connections)
}

fn cmd_synthesize(mut config: PipelineConfig, args: &SynthesizeArgs) -> Result<(), CliError> {
    apply_connection_flags(&mut config, &args.connection);
    if let Some(u) = args.max_usage {
        config.construction.max_usage = u;
    }
    if let Some(l) = args.max_length {
        config.construction.max_length = l;
        config.filter.max_nodes = l;
    }
    if let Some(s) = args.split {
        config.split = s;
    }
    config.validate()?;
    let nodes: Vec<AenNode> = read_records(&args.nodes)?;
    let backend = config.backend()?;
    let scorer = config.scorer(Arc::clone(&backend));
    let discovery = discover_connections(&nodes, &config.connection, scorer.as_ref())?;
    let built = construct_trajectories(
        &nodes,
        &discovery.connections,
        &config.construction,
        backend.as_ref(),
    )?;
    let (kept, rejections) = filter_trajectories(built.trajectories, &config.filter, None);
    let total = kept.len();
    let split = split_dataset(kept, config.split, config.seed)?;
    let report = ConstructionReport {
        nodes_in: nodes.len(),
        pairs_evaluated: discovery.pairs_evaluated,
        connections_kept: discovery.connections.len(),
        trajectories: total,
        rejections,
        skipped: built.skipped,
        connection: config.connection.clone(),
        construction: config.construction.clone(),
        filter: config.filter.clone(),
        split: [split.train.len(), split.validation.len(), split.test.len()],
    };
    fs::create_dir_all(&args.out_dir).map_err(|e| output_err(&args.out_dir, e))?;
    write_json(&args.out_dir.join("report.json"), &report)?;
    if total == 0 {
        return Err(CliError::Empty("no trajectories survived filtering".into()));
    }
    write_records(&args.out_dir.join("train.jsonl"), &split.train)?;
    write_records(&args.out_dir.join("validation.jsonl"), &split.validation)?;
    write_records(&args.out_dir.join("test.jsonl"), &split.test)?;
    eprintln!(
        "{total} trajectories: {} train, {} validation, {} test",
        report.split[0], report.split[1], report.split[2]
    );
    Ok(())
}

fn cmd_run(mut config: PipelineConfig, args: &RunArgs) -> Result<(), CliError> {
    if let Some(m) = args.max_iterations {
        config.limits.max_iterations = m;
    }
    config.validate()?;
    let inputs: Vec<RunInput> = match (&args.query, &args.queries) {
        (Some(q), _) => vec![RunInput {
            sample_id: "q00000".into(),
            query: q.clone(),
            image: args.image.clone(),
            extra: BTreeMap::new(),
        }],
        (None, Some(path)) => read_queries(path)?
            .into_iter()
            .enumerate()
            .map(|(i, q)| RunInput {
                sample_id: q.id.unwrap_or_else(|| format!("q{i:05}")),
                query: q.query,
                image: q.image,
                extra: q.extra,
            })
            .collect(),
        (None, None) => {
            return Err(CliError::Config(
                "one of --query or --queries is required".into(),
            ))
        }
    };
    let orchestrator = Orchestrator::new(
        config.backend()?,
        config.agent_config(),
        config.registry()?,
        config.clock(),
    )?;
    let mut records: Vec<RunRecord> = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let record = orchestrator.run(input)?;
        info!("{}: {:?}", record.sample_id, record.termination);
        records.push(record);
    }
    eprintln!("completed {} run(s)", records.len());
    write_records(&args.out, &records)
}

fn cmd_evaluate(config: &PipelineConfig, args: &EvaluateArgs) -> Result<(), CliError> {
    let runs: Vec<RunRecord> = read_records(&args.runs)?;
    let truth: Option<Vec<MetaTrajectory>> =
        args.ground_truth.as_deref().map(read_records).transpose()?;
    let judge = if args.judge {
        config.validate()?;
        Some(config.backend()?)
    } else {
        None
    };
    let params = EvalParams {
        trr_theta: args.trr_theta,
        ..EvalParams::default()
    };
    if !(0.0..=1.0).contains(&params.trr_theta) {
        return Err(CliError::Config(format!(
            "trr_theta: {} is outside [0, 1]",
            params.trr_theta
        )));
    }
    let report = evaluate_dataset(&runs, truth.as_deref(), judge.as_deref(), &params)?;
    print!("{}", report.table());
    match &args.out {
        Some(path) => write_json(path, &report),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report)
                    .map_err(|e| CliError::Other(e.to_string()))?
            );
            Ok(())
        }
    }
}

fn cmd_parse(args: &ParseArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.transcript).map_err(|e| input_err(&args.transcript, e))?;
    let segments = parse_transcript(&text);
    let value = json!({
        "segments": segments,
        "actions": action_sequence(&segments),
        "final_answer": final_answer(&segments),
    });
    match &args.out {
        Some(path) => write_json(path, &value),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(&value).expect("json values serialize")
            );
            Ok(())
        }
    }
}

fn to_usize(v: u64, flag: &str) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| CliError::Config(format!("--{flag} is too large")))
}

fn cmd_adapter_stats(args: &AdapterStatsArgs) -> Result<(), CliError> {
    let bad = |e: crate::modulation::ModulationError| CliError::Config(e.to_string());
    let stats = parameter_stats(
        to_usize(args.layers, "layers")?,
        to_usize(args.d, "d")?,
        to_usize(args.ffn_mult, "ffn-mult")?,
        to_usize(args.lora_rank, "lora-rank")?,
    )
    .map_err(bad)?;
    let overhead = overhead_estimate(
        to_usize(args.batch, "batch")?,
        to_usize(args.seq_len, "seq-len")?,
        to_usize(args.text_len, "text-len")?,
        to_usize(args.d, "d")?,
    )
    .map_err(bad)?;
    let mut out = std::io::stdout().lock();
    let rows = [
        ("layers", stats.layers.to_string()),
        ("hidden size", stats.d.to_string()),
        (
            "adapter params / layer",
            stats.adapter_per_layer.to_string(),
        ),
        ("adapter params", stats.adapter_params.to_string()),
        ("ffn params / layer", stats.ffn_per_layer.to_string()),
        ("ffn params", stats.ffn_params.to_string()),
        (
            "lora params / layer",
            format!("{} (r = {})", stats.lora_per_layer, stats.lora_rank),
        ),
        ("lora params", stats.lora_params.to_string()),
        (
            "rho",
            format!("{:.6} ({:.4}%)", stats.rho, stats.rho * 100.0),
        ),
        (
            "overhead",
            format!("{overhead:.6} ({:.3}%)", overhead * 100.0),
        ),
    ];
    for (k, v) in rows {
        writeln!(out, "{k:<24}{v}").map_err(|e| CliError::Other(e.to_string()))?;
    }
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs) -> Result<(), CliError> {
    let trajectories: Vec<MetaTrajectory> = read_records(&args.trajectories)?;
    let matrix = count_cooccurrence(&trajectories);
    let config =
        cluster_tools(&matrix, args.min_link).map_err(|e| CliError::Empty(e.to_string()))?;
    eprintln!(
        "{} tool(s) in {} cluster(s)",
        matrix.tools.len(),
        config.clusters.len()
    );
    write_json(&args.out, &config)
}
