//! Argument parsing and subcommand dispatch. Exit codes: 0 success,
//! 2 usage error, 3 data error, 4 runtime failure.

use crate::advisor::HttpAdvisor;
use crate::service;
use causal_atlas::bench::{aggregate, default_suites, records_to_jsonl, run_benchmark, Scenario, ScenarioSuite};
use causal_atlas::diagnostics::{profile_dataset, ProfileHints};
use causal_atlas::pipeline::{prepare, run_pipeline, PipelineConfig};
use causal_atlas::postprocess::ConstraintSet;
use causal_atlas::report::{benchmark_report, pipeline_report, BenchmarkDoc, ReportFormat, ReportMeta};
use causal_atlas::selector::{advisor_rerank, select_algorithm, Advisor, Registry, SelectorConfig};
use causal_atlas::{run_algorithm, AlgorithmId, CancelToken, Dataset, Error, ParamMap, Parallelism};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "causal-atlas", version, about = "Causal structure discovery with automatic algorithm selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario (JSON) into dataset.csv and truth.json
    Simulate(SimulateArgs),
    /// Profile a CSV dataset
    Diagnose(DiagnoseArgs),
    /// Run one algorithm on a CSV dataset
    Discover(DiscoverArgs),
    /// Choose and configure an algorithm for a CSV dataset
    Select(SelectArgs),
    /// Run a benchmark suite
    Bench(BenchArgs),
    /// End-to-end analysis: profile, select, discover, bootstrap, refine, report
    Pipeline(PipelineArgs),
    /// Start the local HTTP service
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random choice
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files; standard output when absent
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON, e.g. {"kind": "tabular", "n_nodes": 10}
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Profile hints JSON; hinted fields replace the tests
    #[arg(long)]
    pub hints: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub algorithm: String,
    /// Hyperparameters JSON object
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 120.0)]
    pub timeout_seconds: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub hints: Option<PathBuf>,
    /// URL of an advisor that may rerank the candidates
    #[arg(long)]
    pub advisor_endpoint: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Built-in suite name or a suite JSON file
    #[arg(long)]
    pub suite: String,
    /// Comma-separated algorithm ids; all matching the suite's data kind by default
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Vec<String>,
    #[arg(long)]
    pub timeout_seconds: Option<f64>,
    /// Override the suite's seed count
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Run sequentially instead of on the thread pool
    #[arg(long)]
    pub sequential: bool,
    /// Timestamp written into the report
    #[arg(long, env = "CAUSAL_ATLAS_TIMESTAMP")]
    pub timestamp: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Full pipeline configuration JSON; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub hints: Option<PathBuf>,
    /// Skip selection and run this algorithm
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Background knowledge JSON: {"required": [[a, b]], "forbidden": [[a, b]], "forbidden_as_effect": [a]}
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Per-algorithm time cap
    #[arg(long)]
    pub timeout_seconds: Option<f64>,
    #[arg(long)]
    pub advisor_endpoint: Option<String>,
    /// md, json or csv
    #[arg(long, default_value = "md")]
    pub format: String,
    /// Timestamp written into the report; the current UTC time when absent
    #[arg(long, env = "CAUSAL_ATLAS_TIMESTAMP")]
    pub timestamp: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CAUSAL_ATLAS_PORT", default_value_t = 8750)]
    pub port: u16,
    #[arg(long, default_value = "runs")]
    pub runs_dir: PathBuf,
    #[arg(long)]
    pub advisor_endpoint: Option<String>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(m: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: m.into() }
    }
    pub fn data(m: impl Into<String>) -> Self {
        Failure { code: EXIT_DATA, message: m.into() }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownAlgorithm(_)
        | Error::UnknownFormat(_)
        | Error::InvalidParameter(_)
        | Error::ConflictingConstraints(..)
        | Error::CycleFromConstraints => EXIT_USAGE,
        Error::MalformedCsv { .. }
        | Error::EmptyDataset
        | Error::AllColumnsConstant
        | Error::ConstantColumn(_)
        | Error::AllMissingColumn(_)
        | Error::NonDiscreteColumn(_)
        | Error::DataContainsMissing
        | Error::SeriesTooShort
        | Error::InsufficientLength { .. } => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn read_text(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn read_dataset(path: &Path) -> std::result::Result<Dataset, Failure> {
    Ok(Dataset::from_csv(&read_text(path)?)?)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Write `files` under `out_dir`, or print them to standard output.
fn emit(out_dir: Option<&Path>, files: &[(&str, String)]) -> Outcome {
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure { code: EXIT_RUNTIME, message: format!("{}: {e}", dir.display()) })?;
            for (name, body) in files {
                let p = dir.join(name);
                std::fs::write(&p, body).map_err(|e| Failure { code: EXIT_RUNTIME, message: format!("{}: {e}", p.display()) })?;
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            for (_, body) in files {
                match out.write_all(body.as_bytes()) {
                    // a closed pipe (e.g. `| head`) is not an error
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
                    Err(e) => return Err(Failure { code: EXIT_RUNTIME, message: e.to_string() }),
                    Ok(()) => {}
                }
            }
        }
    }
    Ok(())
}

pub fn now_utc() -> String {
    time::OffsetDateTime::now_utc()
        .replace_nanosecond(0)
        .ok()
        .and_then(|t| t.format(&time::format_description::well_known::Rfc3339).ok())
        .unwrap_or_else(|| "unknown".into())
}

fn parse_algorithm(s: &str) -> std::result::Result<AlgorithmId, Failure> {
    AlgorithmId::parse(s.trim()).map_err(|e| Failure::usage(e.to_string()))
}

fn hints(path: Option<&Path>) -> std::result::Result<ProfileHints, Failure> {
    path.map_or_else(|| Ok(ProfileHints::default()), read_json)
}

fn advisor(endpoint: Option<&str>) -> Option<HttpAdvisor> {
    endpoint.map(HttpAdvisor::new)
}

fn simulate(a: SimulateArgs) -> Outcome {
    let sc: Scenario = read_json(&a.scenario)?;
    let (truth, data) = sc.with_seed(a.common.seed).simulate()?;
    let truth = truth.with_labels(data.names())?;
    emit(a.common.out_dir.as_deref(), &[("dataset.csv", data.to_csv()), ("truth.json", to_json(&truth.to_json()))])
}

fn diagnose(a: DiagnoseArgs) -> Outcome {
    let (ready, _, _) = prepare(&read_dataset(&a.data)?)?;
    let profile = profile_dataset(&ready, &hints(a.hints.as_deref())?, a.common.seed)?;
    emit(a.common.out_dir.as_deref(), &[("profile.json", to_json(&profile))])
}

fn discover(a: DiscoverArgs) -> Outcome {
    let id = parse_algorithm(&a.algorithm)?;
    let params: ParamMap = a.config.as_deref().map_or_else(|| Ok(ParamMap::new()), read_json)?;
    let (ready, _, _) = prepare(&read_dataset(&a.data)?)?;
    let cancel = CancelToken::with_timeout(Duration::from_secs_f64(a.timeout_seconds.max(1e-3)));
    let out = run_algorithm(id, &ready, &params, Parallelism::Parallel, &cancel).map_err(|e| match e {
        Error::Cancelled => Failure { code: EXIT_RUNTIME, message: format!("{id} timed out after {} s", a.timeout_seconds) },
        e => e.into(),
    })?;
    emit(a.common.out_dir.as_deref(), &[("graph.json", to_json(&out.to_json()))])
}

fn select(a: SelectArgs) -> Outcome {
    let (ready, _, _) = prepare(&read_dataset(&a.data)?)?;
    let profile = profile_dataset(&ready, &hints(a.hints.as_deref())?, a.common.seed)?;
    let registry = Registry::builtin();
    let trace = select_algorithm(&profile, &registry, &SelectorConfig::default())?;
    let adv = advisor(a.advisor_endpoint.as_deref());
    let trace = advisor_rerank(trace, &profile, &registry, adv.as_ref().map(|x| x as &dyn Advisor));
    emit(a.common.out_dir.as_deref(), &[("trace.json", to_json(&trace))])
}

fn load_suite(name: &str) -> std::result::Result<ScenarioSuite, Failure> {
    if let Some(s) = default_suites().remove(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if path.exists() {
        return read_json(path);
    }
    let known: Vec<String> = default_suites().into_keys().collect();
    Err(Failure::usage(format!("unknown suite `{name}`; built-in suites: {}", known.join(", "))))
}

fn bench(a: BenchArgs) -> Outcome {
    let mut suite = load_suite(&a.suite)?;
    if let Some(n) = a.seeds {
        suite.seeds = n;
    }
    suite.validate()?;
    let algorithms: Vec<AlgorithmId> = if a.algorithms.is_empty() {
        let ts = suite.scenarios.first().is_some_and(|s| s.scenario.is_time_series());
        AlgorithmId::ALL.iter().copied().filter(|id| id.is_time_series() == ts).collect()
    } else {
        a.algorithms.iter().map(|s| parse_algorithm(s)).collect::<std::result::Result<_, _>>()?
    };
    let mode = if a.sequential { Parallelism::Sequential } else { Parallelism::Parallel };
    let records = run_benchmark(&suite, &algorithms, a.timeout_seconds, mode)?;
    let aggs = aggregate(&records);
    let timeout = a.timeout_seconds.unwrap_or(suite.timeout_seconds);
    let doc = BenchmarkDoc::new(ReportMeta::new(a.timestamp.unwrap_or_else(now_utc)), &suite.name, suite.seeds, timeout, &records, aggs);
    let md = benchmark_report(&doc, ReportFormat::Markdown)?;
    match a.out_dir.as_deref() {
        Some(dir) => emit(
            Some(dir),
            &[
                ("records.jsonl", records_to_jsonl(&records)?),
                ("aggregates.csv", benchmark_report(&doc, ReportFormat::Csv)?),
                ("report.json", benchmark_report(&doc, ReportFormat::Json)?),
                ("report.md", md),
            ],
        ),
        None => emit(None, &[("report.md", md)]),
    }
}

fn pipeline(a: PipelineArgs) -> Outcome {
    let format: ReportFormat = a.format.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let mut cfg: PipelineConfig = a.config.as_deref().map_or_else(|| Ok(PipelineConfig::default()), read_json)?;
    cfg.seed = a.common.seed;
    if let Some(h) = a.hints.as_deref() {
        cfg.hints = read_json(h)?;
    }
    if let Some(s) = &a.algorithm {
        cfg.algorithm = Some(parse_algorithm(s)?);
    }
    if let Some(c) = a.constraints.as_deref() {
        let cs: ConstraintSet = read_json(c)?;
        cfg.constraints = cfg.constraints.union(&cs);
    }
    if let Some(b) = a.bootstrap {
        if b == 0 {
            return Err(Failure::usage("--bootstrap must be at least 1"));
        }
        cfg.bootstrap_replicates = b;
    }
    if let Some(t) = a.timeout_seconds {
        cfg.algorithm_timeout_seconds = t;
    }
    let data = read_dataset(&a.data)?;
    let adv = advisor(a.advisor_endpoint.as_deref());
    let result = run_pipeline(&data, &cfg, adv.as_ref().map(|x| x as &dyn Advisor))?;
    let meta = ReportMeta::new(a.timestamp.unwrap_or_else(now_utc));
    let report = pipeline_report(&result, format, &meta)?;
    match a.common.out_dir.as_deref() {
        Some(dir) => {
            let name = format!("report.{}", format.extension());
            emit(
                Some(dir),
                &[
                    ("profile.json", to_json(&result.profile)),
                    ("trace.json", to_json(&result.trace)),
                    ("graph.json", to_json(&result.graph)),
                    ("confidence.json", to_json(&result.confidence)),
                    (name.as_str(), report),
                ],
            )
        }
        None => emit(None, &[("report", report)]),
    }
}

fn serve(a: ServeArgs) -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?;
    rt.block_on(async {
        let state = service::AppState::open(a.runs_dir, a.advisor_endpoint).map_err(Failure::from)?;
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", a.port))
            .await
            .map_err(|e| Failure { code: EXIT_RUNTIME, message: format!("cannot bind port {}: {e}", a.port) })?;
        eprintln!("listening on http://127.0.0.1:{}", a.port);
        axum::serve(listener, service::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })
    })
}

pub fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Discover(a) => discover(a),
        Command::Select(a) => select(a),
        Command::Bench(a) => bench(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Serve(a) => serve(a),
    }
}

/// Parse `args` (program name first), run, and return the exit code.
/// Messages go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
