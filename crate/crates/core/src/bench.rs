//! Benchmark harness: scenario suites, capped execution of every
//! (scenario, algorithm, seed) triple, and aggregation.

use crate::algorithms::{default_params, run_algorithm, AlgoOutput, AlgorithmId, ParamMap};
use crate::cancel::CancelToken;
use crate::data::Dataset;
use crate::diagnostics::{impute, ImputeStrategy};
use crate::error::{Error, Result};
use crate::graph::{structural_metrics, DiGraph, EdgeMetrics};
use crate::parallel::{map_range, Parallelism};
use crate::rng::derive_seed;
use crate::sim::{simulate_tabular, simulate_ts_scenario, NoiseKind, TabularScenario, TsScenario};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

pub const DEFAULT_TIMEOUT_SECONDS: f64 = 120.0;
pub const DEFAULT_SEEDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Tabular(TabularScenario),
    TimeSeries(TsScenario),
}

impl Scenario {
    pub fn is_time_series(&self) -> bool {
        matches!(self, Scenario::TimeSeries(_))
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        match self {
            Scenario::Tabular(s) => Scenario::Tabular(TabularScenario { seed, ..s.clone() }),
            Scenario::TimeSeries(s) => Scenario::TimeSeries(TsScenario { seed, ..s.clone() }),
        }
    }

    /// Ground-truth graph (DAG, or summary graph for time series) and data.
    pub fn simulate(&self) -> Result<(DiGraph, Dataset)> {
        match self {
            Scenario::Tabular(s) => simulate_tabular(s).map(|(d, x)| (d.graph().structure(), x)),
            Scenario::TimeSeries(s) => simulate_ts_scenario(s).map(|(g, x)| (g.summary_graph(), x)),
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            Scenario::Tabular(s) => s.n_samples,
            Scenario::TimeSeries(s) => s.n_steps,
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Scenario::Tabular(s) => s.n_nodes,
            Scenario::TimeSeries(s) => s.n_nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteScenario {
    pub id: String,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSuite {
    pub name: String,
    pub scenarios: Vec<SuiteScenario>,
    /// Seeds `0..seeds` are run for every scenario.
    pub seeds: usize,
    pub timeout_seconds: f64,
}

impl ScenarioSuite {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.seeds == 0 {
            return Err(Error::InvalidParameter(format!("suite `{}` is empty", self.name)));
        }
        if !(self.timeout_seconds > 0.0) {
            return Err(Error::InvalidParameter("timeout must be positive".into()));
        }
        Ok(())
    }
}

fn suite(name: &str, scenarios: Vec<(String, Scenario)>) -> ScenarioSuite {
    ScenarioSuite {
        name: name.to_string(),
        scenarios: scenarios.into_iter().map(|(id, scenario)| SuiteScenario { id, scenario }).collect(),
        seeds: DEFAULT_SEEDS,
        timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
    }
}

fn tab(id: String, s: TabularScenario) -> (String, Scenario) {
    (id, Scenario::Tabular(s))
}

fn ts(id: String, s: TsScenario) -> (String, Scenario) {
    (id, Scenario::TimeSeries(s))
}

/// Desk-scaled benchmark axes.
pub fn default_suites() -> BTreeMap<String, ScenarioSuite> {
    let t = TabularScenario::default;
    let s = TsScenario::default;
    let noise_name = |k: NoiseKind| serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let list = vec![
        suite("tabular_default", vec![tab("default".into(), t())]),
        suite(
            "tabular_density",
            [0.11, 0.22, 0.33, 0.44, 0.56].iter().map(|&e| tab(format!("edge_prob_{e}"), TabularScenario { edge_prob: e, ..t() })).collect(),
        ),
        suite("tabular_nodes", [5, 10, 25, 50].iter().map(|&n| tab(format!("nodes_{n}"), TabularScenario { n_nodes: n, ..t() })).collect()),
        suite(
            "tabular_samples",
            [500, 1000, 2000, 5000].iter().map(|&n| tab(format!("samples_{n}"), TabularScenario { n_samples: n, ..t() })).collect(),
        ),
        suite(
            "tabular_noise",
            [NoiseKind::Gaussian, NoiseKind::Uniform].iter().map(|&k| tab(format!("noise_{}", noise_name(k)), TabularScenario { noise: k, ..t() })).collect(),
        ),
        suite(
            "tabular_discrete",
            [0.0, 0.2].iter().map(|&r| tab(format!("discrete_{r}"), TabularScenario { discrete_ratio: r, ..t() })).collect(),
        ),
        suite(
            "tabular_measurement_error",
            vec![
                tab("clean".into(), t()),
                tab("measurement_error".into(), TabularScenario { measurement_error_ratio: 0.5, measurement_error_sd: 0.5, ..t() }),
            ],
        ),
        suite(
            "tabular_missing",
            [0.1, 0.3].iter().map(|&m| tab(format!("missing_{m}"), TabularScenario { missing_rate: m, ..t() })).collect(),
        ),
        suite("tabular_domains", [1, 2, 5].iter().map(|&d| tab(format!("domains_{d}"), TabularScenario { n_domains: d, ..t() })).collect()),
        suite("ts_default", vec![ts("default".into(), s())]),
        suite("ts_nodes", [5, 10, 20].iter().map(|&n| ts(format!("nodes_{n}"), TsScenario { n_nodes: n, ..s() })).collect()),
        suite("ts_lag", [3, 5, 10, 15, 20].iter().map(|&l| ts(format!("lag_{l}"), TsScenario { max_lag: l, ..s() })).collect()),
        suite("ts_samples", [500, 1000, 2000].iter().map(|&n| ts(format!("steps_{n}"), TsScenario { n_steps: n, ..s() })).collect()),
        suite(
            "ts_noise",
            [NoiseKind::Gaussian, NoiseKind::Uniform].iter().map(|&k| ts(format!("noise_{}", noise_name(k)), TsScenario { noise: k, ..s() })).collect(),
        ),
    ];
    list.into_iter().map(|s| (s.name.clone(), s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "message", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Timeout,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_id: String,
    pub algorithm: AlgorithmId,
    pub config: ParamMap,
    pub seed: u64,
    pub metrics: Option<EdgeMetrics>,
    pub runtime_seconds: f64,
    #[serde(flatten)]
    pub status: RunStatus,
}

/// Algorithm call used by the harness; injectable for tests.
pub type Runner = Arc<dyn Fn(AlgorithmId, &Dataset, &ParamMap, &CancelToken) -> Result<AlgoOutput> + Send + Sync>;

pub fn default_runner() -> Runner {
    Arc::new(|id, data, params, cancel| run_algorithm(id, data, params, Parallelism::Sequential, cancel))
}

/// Benchmark configuration: defaults, with the lag of time-series methods
/// set to the scenario's true maximum lag.
pub fn benchmark_params(id: AlgorithmId, scenario: &Scenario) -> ParamMap {
    let mut p = default_params(id);
    if let Scenario::TimeSeries(s) = scenario {
        for key in ["lag", "max_lag"] {
            if p.contains_key(key) {
                p.insert(key.to_string(), s.max_lag.into());
            }
        }
    }
    p
}

/// Run one algorithm on its own thread under a wall-clock cap. The token
/// trips at the deadline so cooperative solvers stop early; a run that
/// ignores it is abandoned and reported as a timeout.
pub fn run_capped(
    runner: &Runner,
    id: AlgorithmId,
    data: Arc<Dataset>,
    params: ParamMap,
    timeout: Duration,
) -> (Result<AlgoOutput>, f64) {
    let cancel = CancelToken::with_timeout(timeout);
    let (tx, rx) = mpsc::channel();
    let start = Instant::now();
    let (r, c) = (runner.clone(), cancel.clone());
    let spawned = std::thread::Builder::new().name(format!("bench-{id}")).spawn(move || {
        let _ = tx.send(r(id, &data, &params, &c));
    });
    if let Err(e) = spawned {
        return (Err(Error::Io(e.to_string())), 0.0);
    }
    let out = match rx.recv_timeout(timeout) {
        Ok(res) => res,
        Err(_) => {
            cancel.cancel();
            Err(Error::Cancelled)
        }
    };
    (out, start.elapsed().as_secs_f64())
}

/// Every triple yields exactly one record, ordered by scenario, algorithm,
/// then seed regardless of completion order.
pub fn run_benchmark(
    suite: &ScenarioSuite,
    algorithms: &[AlgorithmId],
    timeout_override: Option<f64>,
    mode: Parallelism,
) -> Result<Vec<RunRecord>> {
    run_benchmark_with(suite, algorithms, timeout_override, mode, &default_runner())
}

pub fn run_benchmark_with(
    suite: &ScenarioSuite,
    algorithms: &[AlgorithmId],
    timeout_override: Option<f64>,
    mode: Parallelism,
    runner: &Runner,
) -> Result<Vec<RunRecord>> {
    suite.validate()?;
    let timeout = Duration::from_secs_f64(timeout_override.unwrap_or(suite.timeout_seconds).max(1e-3));
    let seeds = suite.seeds;
    let datasets: Vec<Result<(DiGraph, Arc<Dataset>)>> = map_range(suite.scenarios.len() * seeds, mode, |k| {
        let sc = suite.scenarios[k / seeds].scenario.with_seed((k % seeds) as u64);
        let (truth, data) = sc.simulate()?;
        let data = impute(&data, ImputeStrategy::MeanMode)?;
        Ok((truth, Arc::new(data)))
    });
    let n_alg = algorithms.len();
    let total = suite.scenarios.len() * n_alg * seeds;
    Ok(map_range(total, mode, |k| {
        let (si, rest) = (k / (n_alg * seeds), k % (n_alg * seeds));
        let (ai, seed) = (rest / seeds, rest % seeds);
        let entry = &suite.scenarios[si];
        let id = algorithms[ai];
        let config = benchmark_params(id, &entry.scenario);
        let record = |status, metrics, runtime_seconds| RunRecord {
            scenario_id: entry.id.clone(),
            algorithm: id,
            config: config.clone(),
            seed: seed as u64,
            metrics,
            runtime_seconds,
            status,
        };
        if id.is_time_series() != entry.scenario.is_time_series() {
            return record(RunStatus::Error("algorithm does not accept this data kind".into()), None, 0.0);
        }
        let (truth, data) = match &datasets[si * seeds + seed] {
            Ok(v) => v,
            Err(e) => return record(RunStatus::Error(format!("simulation failed: {e}")), None, 0.0),
        };
        match run_capped(runner, id, data.clone(), config.clone(), timeout) {
            (Ok(out), t) => {
                let pred = out.evaluation_graph(derive_seed(seed as u64, 0xE7A1));
                match structural_metrics(&pred, truth) {
                    Ok(m) => record(RunStatus::Ok, Some(m), t),
                    Err(e) => record(RunStatus::Error(e.to_string()), None, t),
                }
            }
            (Err(Error::Cancelled), t) => record(RunStatus::Timeout, None, t),
            (Err(e), t) => record(RunStatus::Error(e.to_string()), None, t),
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario_id: String,
    pub algorithm: AlgorithmId,
    pub runs: usize,
    pub completed: usize,
    pub completion_rate: f64,
    /// `None` when no run completed (reported as N/A).
    pub mean_f1: Option<f64>,
    pub std_f1: Option<f64>,
    pub mean_shd: Option<f64>,
    pub mean_runtime_seconds: Option<f64>,
}

/// Mean and sample standard deviation of sorted values, so the result does
/// not depend on input order. A single value has std 0.
fn sorted_mean_std(mut v: Vec<f64>) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 { 0.0 } else { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    Some((mean, std))
}

/// Per (scenario, algorithm): timeouts and errors are excluded from the
/// means and show up in the completion rate.
pub fn aggregate(records: &[RunRecord]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(String, AlgorithmId), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.scenario_id.clone(), r.algorithm)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scenario_id, algorithm), rs)| {
            let ok: Vec<&EdgeMetrics> = rs.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let f1 = sorted_mean_std(ok.iter().map(|m| m.f1).collect());
            let shd = sorted_mean_std(ok.iter().map(|m| m.shd as f64).collect());
            let rt = sorted_mean_std(rs.iter().filter(|r| r.metrics.is_some()).map(|r| r.runtime_seconds).collect());
            Aggregate {
                scenario_id,
                algorithm,
                runs: rs.len(),
                completed: ok.len(),
                completion_rate: ok.len() as f64 / rs.len() as f64,
                mean_f1: f1.map(|v| v.0),
                std_f1: f1.map(|v| v.1),
                mean_shd: shd.map(|v| v.0),
                mean_runtime_seconds: rt.map(|v| v.0),
            }
        })
        .collect()
}

/// One JSON object per line.
pub fn records_to_jsonl(records: &[RunRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn records_from_jsonl(s: &str) -> Result<Vec<RunRecord>> {
    s.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}
