//! String-addressable dispatch over every implemented discovery algorithm.

use crate::cancel::CancelToken;
use crate::ci::CiTestKind;
use crate::data::Dataset;
use crate::discovery::timeseries::{
    dynotears_cancellable, granger_multivariate, granger_pairwise, var_lingam_cancellable, DynotearsConfig, GrangerConfig,
};
use crate::discovery::{
    iamb::iamb_cpdag_cancellable, lingam::direct_lingam_fit, notears::notears_linear_cancellable, pc::pc_cancellable,
    score::score_search_cancellable, NotearsConfig, PcConfig, ScoreConfig,
};
use crate::error::{Error, Result};
use crate::graph::{evaluation_dag, Cpdag, Dag, DiGraph, GraphJson, TemporalGraph};
use crate::parallel::Parallelism;
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Hyperparameters as a JSON object; keys are the config struct's fields.
pub type ParamMap = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    Pc,
    ScoreSearch,
    NotearsLinear,
    DirectLingam,
    IambCpdag,
    GrangerPairwise,
    GrangerMultivariate,
    VarLingam,
    Dynotears,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ConstraintBased,
    ScoreBased,
    ContinuousOptimization,
    FunctionalCausalModel,
    MarkovBlanket,
    GrangerCausality,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 9] = [
        AlgorithmId::Pc,
        AlgorithmId::ScoreSearch,
        AlgorithmId::NotearsLinear,
        AlgorithmId::DirectLingam,
        AlgorithmId::IambCpdag,
        AlgorithmId::GrangerPairwise,
        AlgorithmId::GrangerMultivariate,
        AlgorithmId::VarLingam,
        AlgorithmId::Dynotears,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::Pc => "pc",
            AlgorithmId::ScoreSearch => "score_search",
            AlgorithmId::NotearsLinear => "notears_linear",
            AlgorithmId::DirectLingam => "direct_lingam",
            AlgorithmId::IambCpdag => "iamb_cpdag",
            AlgorithmId::GrangerPairwise => "granger_pairwise",
            AlgorithmId::GrangerMultivariate => "granger_multivariate",
            AlgorithmId::VarLingam => "var_lingam",
            AlgorithmId::Dynotears => "dynotears",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }

    pub fn is_time_series(self) -> bool {
        matches!(
            self,
            AlgorithmId::GrangerPairwise | AlgorithmId::GrangerMultivariate | AlgorithmId::VarLingam | AlgorithmId::Dynotears
        )
    }

    pub fn family(self) -> Family {
        match self {
            AlgorithmId::Pc => Family::ConstraintBased,
            AlgorithmId::ScoreSearch => Family::ScoreBased,
            AlgorithmId::NotearsLinear | AlgorithmId::Dynotears => Family::ContinuousOptimization,
            AlgorithmId::DirectLingam | AlgorithmId::VarLingam => Family::FunctionalCausalModel,
            AlgorithmId::IambCpdag => Family::MarkovBlanket,
            AlgorithmId::GrangerPairwise | AlgorithmId::GrangerMultivariate => Family::GrangerCausality,
        }
    }

    /// Largest lag the algorithm looks back, used for block bootstrap.
    pub fn max_lag(self, params: &ParamMap) -> Option<usize> {
        if !self.is_time_series() {
            return None;
        }
        let key = match self {
            AlgorithmId::GrangerPairwise | AlgorithmId::GrangerMultivariate => "max_lag",
            _ => "lag",
        };
        Some(params.get(key).and_then(|v| v.as_u64()).map_or(3, |v| v as usize))
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IambConfig {
    pub alpha: f64,
    pub test: CiTestKind,
}

impl Default for IambConfig {
    fn default() -> Self {
        IambConfig { alpha: 0.05, test: CiTestKind::FisherZ }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarLingamConfig {
    pub lag: usize,
}

impl Default for VarLingamConfig {
    fn default() -> Self {
        VarLingamConfig { lag: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoConfig {}

fn parse_config<T: DeserializeOwned>(params: &ParamMap) -> Result<T> {
    let obj: serde_json::Map<String, serde_json::Value> = params.clone().into_iter().collect();
    serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn to_params<T: Serialize>(cfg: &T) -> ParamMap {
    match serde_json::to_value(cfg) {
        Ok(serde_json::Value::Object(m)) => m.into_iter().collect(),
        _ => ParamMap::new(),
    }
}

/// Full parameter map with every default filled in.
pub fn default_params(id: AlgorithmId) -> ParamMap {
    match id {
        AlgorithmId::Pc => to_params(&PcConfig::default()),
        AlgorithmId::ScoreSearch => to_params(&ScoreConfig::default()),
        AlgorithmId::NotearsLinear => to_params(&NotearsConfig::default()),
        AlgorithmId::DirectLingam => ParamMap::new(),
        AlgorithmId::IambCpdag => to_params(&IambConfig::default()),
        AlgorithmId::GrangerPairwise | AlgorithmId::GrangerMultivariate => to_params(&GrangerConfig::default()),
        AlgorithmId::VarLingam => to_params(&VarLingamConfig::default()),
        AlgorithmId::Dynotears => to_params(&DynotearsConfig::default()),
    }
}

/// Reject keys the algorithm does not know and values of the wrong type.
pub fn validate_params(id: AlgorithmId, params: &ParamMap) -> Result<()> {
    let known = default_params(id);
    if let Some(k) = params.keys().find(|k| !known.contains_key(*k)) {
        return Err(Error::InvalidParameter(format!("{id} has no parameter `{k}`")));
    }
    match id {
        AlgorithmId::Pc => parse_config::<PcConfig>(params)?.validate(),
        AlgorithmId::ScoreSearch => parse_config::<ScoreConfig>(params).map(drop),
        AlgorithmId::NotearsLinear => parse_config::<NotearsConfig>(params)?.validate(),
        AlgorithmId::DirectLingam => parse_config::<NoConfig>(params).map(drop),
        AlgorithmId::IambCpdag => parse_config::<IambConfig>(params).map(drop),
        AlgorithmId::GrangerPairwise | AlgorithmId::GrangerMultivariate => parse_config::<GrangerConfig>(params).map(drop),
        AlgorithmId::VarLingam => parse_config::<VarLingamConfig>(params).map(drop),
        AlgorithmId::Dynotears => parse_config::<DynotearsConfig>(params).map(drop),
    }
}

/// What an algorithm returns, by output class.
#[derive(Debug, Clone)]
pub enum AlgoOutput {
    Dag(Dag),
    Cpdag(Cpdag),
    Temporal(TemporalGraph),
    /// Summary graph without an acyclicity guarantee (Granger).
    Summary(DiGraph),
}

impl AlgoOutput {
    pub fn n_nodes(&self) -> usize {
        match self {
            AlgoOutput::Dag(d) => d.graph().n_nodes(),
            AlgoOutput::Cpdag(c) => c.n_nodes(),
            AlgoOutput::Temporal(t) => t.n_nodes(),
            AlgoOutput::Summary(g) => g.n_nodes(),
        }
    }

    /// Directed graph compared against the truth: partially directed outputs
    /// are resolved with a seeded consistent extension; temporal outputs are
    /// collapsed to their summary graph.
    pub fn evaluation_graph(&self, seed: u64) -> DiGraph {
        match self {
            AlgoOutput::Dag(d) => d.graph().structure(),
            AlgoOutput::Cpdag(c) => evaluation_dag(c, seed).graph().structure(),
            AlgoOutput::Temporal(t) => t.summary_graph(),
            AlgoOutput::Summary(g) => g.structure(),
        }
    }

    /// Per-direction vote for one bootstrap replicate. An undirected edge
    /// counts one half toward each direction; the diagonal is zero.
    pub fn votes(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        let mut v = DMatrix::zeros(n, n);
        match self {
            AlgoOutput::Cpdag(c) => {
                for (i, j) in c.directed_edges() {
                    v[(i, j)] = 1.0;
                }
                for (i, j) in c.undirected_edges() {
                    v[(i, j)] = 0.5;
                    v[(j, i)] = 0.5;
                }
            }
            other => {
                for (i, j) in other.evaluation_graph(0).edges() {
                    if i != j {
                        v[(i, j)] = 1.0;
                    }
                }
            }
        }
        v
    }

    pub fn to_json(&self) -> GraphJson {
        match self {
            AlgoOutput::Dag(d) => d.graph().to_json(),
            AlgoOutput::Cpdag(c) => c.to_json(),
            AlgoOutput::Temporal(t) => t.to_json(),
            AlgoOutput::Summary(g) => g.to_json(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AlgoOutput::Dag(_) => "dag",
            AlgoOutput::Cpdag(_) => "cpdag",
            AlgoOutput::Temporal(_) => "temporal",
            AlgoOutput::Summary(_) => "summary",
        }
    }
}

/// Run `id` on `data` with `params` merged over the defaults.
pub fn run_algorithm(
    id: AlgorithmId,
    data: &Dataset,
    params: &ParamMap,
    mode: Parallelism,
    cancel: &CancelToken,
) -> Result<AlgoOutput> {
    validate_params(id, params)?;
    cancel.check()?;
    Ok(match id {
        AlgorithmId::Pc => AlgoOutput::Cpdag(pc_cancellable(data, &parse_config(params)?, mode, cancel)?),
        AlgorithmId::ScoreSearch => AlgoOutput::Cpdag(score_search_cancellable(data, &parse_config(params)?, cancel)?),
        AlgorithmId::NotearsLinear => AlgoOutput::Dag(notears_linear_cancellable(data, &parse_config(params)?, cancel)?),
        AlgorithmId::DirectLingam => AlgoOutput::Dag(direct_lingam_fit(data, cancel)?.dag),
        AlgorithmId::IambCpdag => {
            let cfg: IambConfig = parse_config(params)?;
            AlgoOutput::Cpdag(iamb_cpdag_cancellable(data, cfg.alpha, cfg.test, mode, cancel)?)
        }
        AlgorithmId::GrangerPairwise => AlgoOutput::Summary(granger_pairwise(data, &parse_config(params)?)?.graph),
        AlgorithmId::GrangerMultivariate => AlgoOutput::Summary(granger_multivariate(data, &parse_config(params)?)?.graph),
        AlgorithmId::VarLingam => {
            let cfg: VarLingamConfig = parse_config(params)?;
            AlgoOutput::Temporal(var_lingam_cancellable(data, cfg.lag, cancel)?.graph)
        }
        AlgorithmId::Dynotears => AlgoOutput::Temporal(dynotears_cancellable(data, &parse_config(params)?, cancel)?),
    })
}
