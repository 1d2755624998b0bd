//! The autonomous workflow: prepare, profile, select, discover (falling
//! back down the ranking on failure), bootstrap, refine, constrain.

use crate::algorithms::{run_algorithm, AlgoOutput, AlgorithmId, ParamMap};
use crate::cancel::CancelToken;
use crate::data::Dataset;
use crate::diagnostics::{drop_constant, impute, infer_schema, profile_dataset, DataKind, DatasetProfile, ImputeStrategy, ProfileHints};
use crate::error::{Error, Result};
use crate::graph::{DiGraph, GraphJson};
use crate::parallel::Parallelism;
use crate::postprocess::{
    apply_constraints, apply_constraints_summary, bootstrap_edge_frequencies, refine_graph, refine_summary_graph, ConstraintSet,
    EdgeConfidence, UncertainEdge, DEFAULT_HI, DEFAULT_LO, DEFAULT_REPLICATES,
};
use crate::rng;
use crate::selector::{
    advisor_rerank, configure_hyperparameters, select_algorithm, Advisor, Registry, SelectionTrace, SelectorConfig,
};
use serde::{Deserialize, Serialize};
use std::time::Duration;

pub const DEFAULT_ALGORITHM_TIMEOUT: f64 = 120.0;
pub const DEFAULT_BOOTSTRAP_TIMEOUT: f64 = 600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub hints: ProfileHints,
    /// Skip selection and run this algorithm.
    pub algorithm: Option<AlgorithmId>,
    /// Merged over the configured hyperparameters of the first attempt.
    pub params: ParamMap,
    pub bootstrap_replicates: usize,
    pub hi: f64,
    pub lo: f64,
    pub constraints: ConstraintSet,
    pub selector: SelectorConfig,
    pub algorithm_timeout_seconds: f64,
    pub bootstrap_timeout_seconds: f64,
    pub parallelism: Parallelism,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            hints: ProfileHints::default(),
            algorithm: None,
            params: ParamMap::new(),
            bootstrap_replicates: DEFAULT_REPLICATES,
            hi: DEFAULT_HI,
            lo: DEFAULT_LO,
            constraints: ConstraintSet::default(),
            selector: SelectorConfig::default(),
            algorithm_timeout_seconds: DEFAULT_ALGORITHM_TIMEOUT,
            bootstrap_timeout_seconds: DEFAULT_BOOTSTRAP_TIMEOUT,
            parallelism: Parallelism::Parallel,
        }
    }
}

/// Lifecycle of a run; the service reports it, the pipeline advances it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pending,
    Profiling,
    Selecting,
    Discovering,
    Bootstrapping,
    AwaitingReview,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub n_columns: usize,
    pub columns: Vec<String>,
    pub discrete_columns: Vec<String>,
    pub missing_cells: usize,
    pub imputed: bool,
    pub dropped_constant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub algorithm: AlgorithmId,
    pub config: ParamMap,
    /// `None` on success.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub from: String,
    pub to: String,
    pub frequency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    pub uncertain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub dataset: DatasetSummary,
    pub profile: DatasetProfile,
    pub trace: SelectionTrace,
    pub algorithm: AlgorithmId,
    pub config: ParamMap,
    pub attempts: Vec<Attempt>,
    /// Raw output of the successful attempt (CPDAG, DAG, temporal or summary).
    pub discovered: GraphJson,
    pub confidence: EdgeConfidence,
    pub refinement_log: Vec<String>,
    pub constraints: ConstraintSet,
    pub graph: GraphJson,
    pub edges: Vec<EdgeReport>,
    pub uncertain: Vec<UncertainEdge>,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub bootstrap_replicates: usize,
    pub hi: f64,
    pub lo: f64,
    pub version: String,
}

impl PipelineResult {
    pub fn final_graph(&self) -> Result<DiGraph> {
        DiGraph::from_json(&self.graph)
    }
}

/// Type columns, drop constant ones and impute gaps so every algorithm can
/// run.
pub fn prepare(data: &Dataset) -> Result<(Dataset, DatasetSummary, Vec<String>)> {
    let typed = infer_schema(data)?;
    let missing_cells = typed.missing_count();
    let (reduced, dropped) = drop_constant(&typed)?;
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        warnings.push(format!("dropped constant or empty columns: {}", dropped.join(", ")));
    }
    let imputed = reduced.has_missing();
    let ready = impute(&reduced, ImputeStrategy::MeanMode)?;
    if imputed {
        warnings.push(format!("imputed {missing_cells} missing cells with column mean or mode"));
    }
    let summary = DatasetSummary {
        n_samples: ready.n_samples(),
        n_columns: ready.n_columns(),
        columns: ready.names(),
        discrete_columns: (0..ready.n_columns()).filter(|&c| ready.is_discrete(c)).map(|c| ready.columns[c].name.clone()).collect(),
        missing_cells,
        imputed,
        dropped_constant: dropped,
    };
    Ok((ready, summary, warnings))
}

/// Profile and select. With an algorithm override the trace still records
/// the ranking, but `chosen` is the override.
pub fn profile_and_select(
    data: &Dataset,
    cfg: &PipelineConfig,
    advisor: Option<&dyn Advisor>,
    progress: &dyn Fn(Phase),
) -> Result<(DatasetProfile, SelectionTrace)> {
    progress(Phase::Profiling);
    let profile = profile_dataset(data, &cfg.hints, rng::derive_seed(cfg.seed, 0x9F0F))?;
    progress(Phase::Selecting);
    let registry = Registry::builtin();
    let mut trace = select_algorithm(&profile, &registry, &cfg.selector)?;
    trace = advisor_rerank(trace, &profile, &registry, advisor);
    if let Some(id) = cfg.algorithm {
        if id.is_time_series() != (profile.data_kind == DataKind::TimeSeries) {
            return Err(Error::InvalidParameter(format!("{id} does not accept {:?} data", profile.data_kind)));
        }
        if id != trace.chosen {
            let (config, rules) = configure_hyperparameters(id, &profile)?;
            trace.rationale.push(format!("user override: running {id} instead of {}", trace.chosen));
            trace.rationale.extend(rules.into_iter().map(|r| format!("config: {r}")));
            trace.chosen = id;
            trace.config = config;
        }
    }
    Ok((profile, trace))
}

fn attempt_order(trace: &SelectionTrace) -> Vec<AlgorithmId> {
    let mut order = vec![trace.chosen];
    order.extend(trace.ranked.iter().map(|r| r.id).filter(|&id| id != trace.chosen));
    order
}

fn weight_of(out: &AlgoOutput, i: usize, j: usize) -> Option<f64> {
    match out {
        AlgoOutput::Dag(d) => d.graph().weight(i, j),
        _ => None,
    }
}

/// Discovery onward, for a profile and trace computed earlier. Used both by
/// the full pipeline and by constraint re-runs.
pub fn discover_and_refine(
    data: &Dataset,
    summary: DatasetSummary,
    profile: DatasetProfile,
    trace: SelectionTrace,
    mut warnings: Vec<String>,
    cfg: &PipelineConfig,
    progress: &dyn Fn(Phase),
) -> Result<PipelineResult> {
    // Checked up front so a bad set fails before any expensive work.
    cfg.constraints.resolve(&data.names())?;
    progress(Phase::Discovering);
    let mut attempts = Vec::new();
    let mut success = None;
    let mut last_err = None;
    for (k, id) in attempt_order(&trace).into_iter().enumerate() {
        let mut config = if k == 0 { trace.config.clone() } else { configure_hyperparameters(id, &profile)?.0 };
        if k == 0 {
            config.extend(cfg.params.iter().map(|(a, b)| (a.clone(), b.clone())));
        }
        let cancel = CancelToken::with_timeout(Duration::from_secs_f64(cfg.algorithm_timeout_seconds.max(1e-3)));
        match run_algorithm(id, data, &config, cfg.parallelism, &cancel) {
            Ok(out) => {
                attempts.push(Attempt { algorithm: id, config: config.clone(), error: None });
                success = Some((id, config, out));
                break;
            }
            Err(e) => {
                let msg = if matches!(e, Error::Cancelled) { format!("timed out after {} s", cfg.algorithm_timeout_seconds) } else { e.to_string() };
                warnings.push(format!("{id} failed ({msg}); falling back to the next-ranked candidate"));
                log::warn!("{id} failed: {msg}");
                attempts.push(Attempt { algorithm: id, config, error: Some(msg) });
                last_err = Some(e);
            }
        }
    }
    let Some((algorithm, config, out)) = success else {
        return Err(last_err.unwrap_or_else(|| Error::InvalidParameter("no candidate algorithm".into())));
    };

    progress(Phase::Bootstrapping);
    let labels = data.names();
    let cancel = CancelToken::with_timeout(Duration::from_secs_f64(cfg.bootstrap_timeout_seconds.max(1e-3)));
    let boot_seed = rng::derive_seed(cfg.seed, 0xB007);
    let confidence = match bootstrap_edge_frequencies(data, algorithm, &config, cfg.bootstrap_replicates, boot_seed, cfg.parallelism, &cancel) {
        Ok(c) => c,
        Err(e) => {
            warnings.push(format!("bootstrap unavailable ({e}); confidence reflects the single fitted graph"));
            EdgeConfidence::from_matrix(labels.clone(), &out.votes(), 1, 0)
        }
    };
    if confidence.failed > 0 {
        warnings.push(format!("{} of {} bootstrap replicates failed and were skipped", confidence.failed, cfg.bootstrap_replicates));
    }

    let point = out.evaluation_graph(rng::derive_seed(cfg.seed, 0xE7A1)).with_labels(labels.clone())?;
    let summary_graph = profile.data_kind == DataKind::TimeSeries;
    let refined = if summary_graph {
        refine_summary_graph(&point, &confidence, cfg.hi, cfg.lo)?
    } else {
        refine_graph(&point, &confidence, cfg.hi, cfg.lo)?
    };
    let graph = if summary_graph {
        apply_constraints_summary(&refined.graph, &cfg.constraints)?
    } else {
        apply_constraints(&refined.graph, &cfg.constraints)?
    };
    let uncertain: Vec<UncertainEdge> =
        refined.uncertain.into_iter().filter(|u| graph.edges().iter().any(|&(i, j)| labels[i] == u.from && labels[j] == u.to)).collect();
    let edges = graph
        .edges()
        .into_iter()
        .map(|(i, j)| {
            let f = confidence.get(i, j);
            EdgeReport {
                from: labels[i].clone(),
                to: labels[j].clone(),
                frequency: f,
                weight: weight_of(&out, i, j),
                uncertain: f > cfg.lo && f < cfg.hi,
            }
        })
        .collect();
    Ok(PipelineResult {
        dataset: summary,
        profile,
        trace,
        algorithm,
        config,
        attempts,
        discovered: out.to_json(),
        confidence,
        refinement_log: refined.log,
        constraints: cfg.constraints.clone(),
        graph: graph.to_json(),
        edges,
        uncertain,
        warnings,
        seed: cfg.seed,
        bootstrap_replicates: cfg.bootstrap_replicates,
        hi: cfg.hi,
        lo: cfg.lo,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig, advisor: Option<&dyn Advisor>) -> Result<PipelineResult> {
    run_pipeline_with_progress(data, cfg, advisor, &|_| {})
}

pub fn run_pipeline_with_progress(
    data: &Dataset,
    cfg: &PipelineConfig,
    advisor: Option<&dyn Advisor>,
    progress: &dyn Fn(Phase),
) -> Result<PipelineResult> {
    let (ready, summary, mut warnings) = prepare(data)?;
    let (profile, trace) = profile_and_select(&ready, cfg, advisor, progress)?;
    warnings.extend(trace.warnings.iter().cloned());
    discover_and_refine(&ready, summary, profile, trace, warnings, cfg, progress)
}

/// Re-run discovery and bootstrap for `previous` with extra constraints,
/// keeping its profile and selection. Constraints accumulate.
pub fn rerun_with_constraints(
    data: &Dataset,
    previous: &PipelineResult,
    cfg: &PipelineConfig,
    extra: &ConstraintSet,
    progress: &dyn Fn(Phase),
) -> Result<PipelineResult> {
    let (ready, summary, mut warnings) = prepare(data)?;
    warnings.extend(previous.trace.warnings.iter().cloned());
    let merged = previous.constraints.union(extra);
    merged.resolve(&ready.names())?;
    let mut trace = previous.trace.clone();
    trace.chosen = previous.algorithm;
    trace.config = previous.config.clone();
    let cfg = PipelineConfig { constraints: merged, params: ParamMap::new(), ..cfg.clone() };
    discover_and_refine(&ready, summary, previous.profile.clone(), trace, warnings, &cfg, progress)
}
