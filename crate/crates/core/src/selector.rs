//! Algorithm selection: hard filtering, ranking by ratings blended with
//! benchmark evidence, hyperparameter configuration, and an optional
//! external advisor that may swap the choice among surviving candidates.

use crate::algorithms::{default_params, AlgorithmId, Family, ParamMap};
use crate::diagnostics::{DataKind, DatasetProfile, Linearity, NoiseVerdict, DENSE_THRESHOLD};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Profiles with more variables than this activate the `large_p` condition.
pub const LARGE_P: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Poor,
    Limited,
    Moderate,
    Strong,
    Robust,
}

impl Rating {
    pub fn ordinal(self) -> u32 {
        self as u32 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Linear,
    Nonlinear,
    Dense,
    Sparse,
    LargeP,
    NonGaussian,
    Heterogeneous,
    MissingTolerant,
    DiscreteMix,
}

/// Conditions the profile switches on. Unknown verdicts activate nothing.
pub fn active_conditions(p: &DatasetProfile) -> Vec<Condition> {
    let mut c = Vec::new();
    match p.linearity {
        Linearity::Linear => c.push(Condition::Linear),
        Linearity::Nonlinear => c.push(Condition::Nonlinear),
        Linearity::Unknown => {}
    }
    match p.edge_density {
        Some(d) if d >= DENSE_THRESHOLD => c.push(Condition::Dense),
        Some(_) => c.push(Condition::Sparse),
        None => {}
    }
    if p.n_vars > LARGE_P {
        c.push(Condition::LargeP);
    }
    if p.gaussian_noise == NoiseVerdict::NonGaussian {
        c.push(Condition::NonGaussian);
    }
    if p.heterogeneous == Some(true) {
        c.push(Condition::Heterogeneous);
    }
    if p.missing_rate > 0.0 {
        c.push(Condition::MissingTolerant);
    }
    if p.discrete_ratio > 0.0 {
        c.push(Condition::DiscreteMix);
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingCell {
    pub rating: Rating,
    /// Benchmark observation the rating is distilled from.
    pub evidence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Requirement {
    DataKind(DataKind),
    MaxVars(usize),
    ContinuousOnly,
    NonGaussianNoise,
    /// Predicted runtime must fit the profile's budget.
    WithinBudget,
}

impl Requirement {
    pub fn describe(&self) -> String {
        match self {
            Requirement::DataKind(DataKind::Tabular) => "requires tabular data".into(),
            Requirement::DataKind(DataKind::TimeSeries) => "requires time-series data".into(),
            Requirement::MaxVars(m) => format!("supports at most {m} variables"),
            Requirement::ContinuousOnly => "requires all-continuous data".into(),
            Requirement::NonGaussianNoise => "requires non-Gaussian noise".into(),
            Requirement::WithinBudget => "predicted runtime exceeds the budget".into(),
        }
    }
}

/// Scenario summary used to match a profile to benchmark evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub log_n: f64,
    pub log_p: f64,
    pub density: f64,
    /// 1 linear, 0 nonlinear, 0.5 unknown.
    pub linear: f64,
    /// 1 Gaussian, 0 non-Gaussian, 0.5 unknown.
    pub gaussian: f64,
}

impl Fingerprint {
    pub fn from_profile(p: &DatasetProfile) -> Self {
        let flag = |yes: bool, no: bool| if yes { 1.0 } else if no { 0.0 } else { 0.5 };
        Fingerprint {
            log_n: (p.n_samples.max(1) as f64).ln(),
            log_p: (p.n_vars.max(1) as f64).ln(),
            density: p.edge_density.unwrap_or(0.5),
            linear: flag(p.linearity == Linearity::Linear, p.linearity == Linearity::Nonlinear),
            gaussian: flag(p.gaussian_noise == NoiseVerdict::Gaussian, p.gaussian_noise == NoiseVerdict::NonGaussian),
        }
    }

    /// Mean of per-component absolute differences; log sizes are scaled by
    /// ln 10 so one decade counts as one unit.
    pub fn distance(&self, o: &Fingerprint) -> f64 {
        let ln10 = std::f64::consts::LN_10;
        ((self.log_n - o.log_n).abs() / ln10
            + (self.log_p - o.log_p).abs() / ln10
            + (self.density - o.density).abs()
            + (self.linear - o.linear).abs()
            + (self.gaussian - o.gaussian).abs())
            / 5.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub scenario: String,
    pub fingerprint: Fingerprint,
    pub n_samples: usize,
    pub n_vars: usize,
    pub mean_f1: f64,
    pub mean_runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEntry {
    pub id: AlgorithmId,
    pub family: Family,
    pub data_kind: DataKind,
    pub hard_requirements: Vec<Requirement>,
    pub ratings: BTreeMap<Condition, RatingCell>,
    pub default_config: ParamMap,
    pub benchmark_rows: Vec<BenchmarkRow>,
}

impl AlgorithmEntry {
    /// Unrated conditions count as Moderate.
    pub fn rating(&self, c: Condition) -> Rating {
        self.ratings.get(&c).map_or(Rating::Moderate, |r| r.rating)
    }

    pub fn nearest_row(&self, fp: &Fingerprint) -> Option<&BenchmarkRow> {
        self.benchmark_rows
            .iter()
            .min_by(|a, b| a.fingerprint.distance(fp).total_cmp(&b.fingerprint.distance(fp)).then(a.scenario.cmp(&b.scenario)))
    }

    /// Nearest-row runtime scaled linearly in samples and quadratically in
    /// variables. A heuristic, not a fitted model.
    pub fn predicted_runtime(&self, p: &DatasetProfile) -> Option<f64> {
        let row = self.nearest_row(&Fingerprint::from_profile(p))?;
        let sn = p.n_samples as f64 / row.n_samples.max(1) as f64;
        let sp = p.n_vars as f64 / row.n_vars.max(1) as f64;
        Some(row.mean_runtime_seconds * sn * sp * sp)
    }

    fn violation(&self, req: &Requirement, p: &DatasetProfile) -> bool {
        match *req {
            Requirement::DataKind(k) => p.data_kind != k,
            Requirement::MaxVars(m) => p.n_vars > m,
            Requirement::ContinuousOnly => p.discrete_ratio > 0.0,
            Requirement::NonGaussianNoise => p.gaussian_noise == NoiseVerdict::Gaussian,
            Requirement::WithinBudget => self.predicted_runtime(p).is_some_and(|t| t > p.runtime_budget_seconds),
        }
    }

    pub fn violations(&self, p: &DatasetProfile) -> Vec<Requirement> {
        self.hard_requirements.iter().filter(|r| self.violation(r, p)).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub entries: Vec<AlgorithmEntry>,
}

const BUILTIN_ROWS: &str = include_str!("../data/benchmark_rows.json");

/// Condition, rating, evidence.
type RatingRow = (Condition, Rating, &'static str);

fn cells(list: &[(Condition, Rating, &str)]) -> BTreeMap<Condition, RatingCell> {
    list.iter().map(|&(c, rating, e)| (c, RatingCell { rating, evidence: e.to_string() })).collect()
}

impl Registry {
    /// Every implemented algorithm with its ratings and the embedded
    /// benchmark rows.
    pub fn builtin() -> Registry {
        use Condition::*;
        use Rating::*;
        let rows: BTreeMap<AlgorithmId, Vec<BenchmarkRow>> = serde_json::from_str(BUILTIN_ROWS).unwrap_or_default();
        let tab = Requirement::DataKind(DataKind::Tabular);
        let tsk = Requirement::DataKind(DataKind::TimeSeries);
        let table: Vec<(AlgorithmId, Vec<Requirement>, Vec<RatingRow>)> = vec![
            (
                AlgorithmId::Pc,
                vec![tab, Requirement::MaxVars(1000), Requirement::WithinBudget],
                vec![
                    (Linear, Strong, "constraint-based search is consistent on linear data, below the score-based peak"),
                    (Nonlinear, Limited, "the rank-based test only sees monotone dependence; kernel tests are not shipped"),
                    (Sparse, Strong, "accurate on moderate-sized sparse networks"),
                    (Dense, Limited, "sensitive to dense connectivity"),
                    (LargeP, Strong, "batched independence tests scale to many variables"),
                    (NonGaussian, Strong, "independence-test methods are stable across noise types"),
                    (Heterogeneous, Limited, "domain shifts act as hidden confounders"),
                    (MissingTolerant, Strong, "constraint-based methods are resilient to missing data"),
                    (DiscreteMix, Strong, "chi-squared and mixed tests handle discrete columns"),
                ],
            ),
            (
                AlgorithmId::ScoreSearch,
                vec![tab, Requirement::MaxVars(200), Requirement::WithinBudget],
                vec![
                    (Linear, Strong, "score-based methods dominate linear settings"),
                    (Nonlinear, Limited, "Gaussian likelihood scores miss nonlinear dependence"),
                    (Sparse, Strong, "high F1 on sparse to moderately dense linear graphs"),
                    (Dense, Limited, "performance declines as edge probability grows"),
                    (LargeP, Moderate, "greedy search cost grows with the variable count"),
                    (NonGaussian, Strong, "robust to uniform noise despite the Gaussian score"),
                    (Heterogeneous, Poor, "suffers from the confounding effect of domain changes"),
                    (MissingTolerant, Moderate, "no specific mechanism for incomplete data"),
                    (DiscreteMix, Moderate, "drops as the discrete ratio increases"),
                ],
            ),
            (
                AlgorithmId::NotearsLinear,
                vec![tab, Requirement::ContinuousOnly, Requirement::MaxVars(200), Requirement::WithinBudget],
                vec![
                    (Linear, Robust, "continuous optimization excels on linear relationships"),
                    (Nonlinear, Poor, "performance drops sharply on nonlinear relationships"),
                    (Sparse, Robust, "robust to both sparse and dense graphs"),
                    (Dense, Robust, "soft sparsity regularization keeps dense graphs recoverable"),
                    (LargeP, Limited, "matrix-exponential constraint is cubic in the variable count"),
                    (NonGaussian, Strong, "score-based objectives stay robust to uniform noise despite the Gaussian likelihood"),
                    (Heterogeneous, Poor, "suffers from the confounding effect of domain changes"),
                    (MissingTolerant, Moderate, "no specific mechanism for incomplete data"),
                    (DiscreteMix, Strong, "keeps reasonable accuracy on mixed data"),
                ],
            ),
            (
                AlgorithmId::DirectLingam,
                vec![tab, Requirement::ContinuousOnly, Requirement::NonGaussianNoise, Requirement::MaxVars(200), Requirement::WithinBudget],
                vec![
                    (Linear, Robust, "identifies the full DAG in the linear non-Gaussian setting"),
                    (Nonlinear, Poor, "degrades significantly on nonlinear data"),
                    (Sparse, Robust, "order search does not depend on sparsity"),
                    (Dense, Robust, "order search does not depend on sparsity"),
                    (LargeP, Limited, "pairwise order search is cubic in the variable count"),
                    (NonGaussian, Robust, "perfect identification with non-Gaussian noise"),
                    (Heterogeneous, Poor, "domain mixtures break the independent-noise model"),
                    (MissingTolerant, Limited, "imputation distorts the noise distribution"),
                    (DiscreteMix, Poor, "discrete columns violate the continuous noise model"),
                ],
            ),
            (
                AlgorithmId::IambCpdag,
                vec![tab, Requirement::MaxVars(1000), Requirement::WithinBudget],
                vec![
                    (Linear, Moderate, "below score-based methods on linear data"),
                    (Nonlinear, Limited, "the rank-based test only sees monotone dependence; kernel tests are not shipped"),
                    (Sparse, Moderate, "local searches waste little on sparse graphs but gain little either"),
                    (Dense, Strong, "Markov-blanket methods stay stable as edge probability grows"),
                    (LargeP, Strong, "local subproblems scale gracefully with network size"),
                    (NonGaussian, Strong, "independence-test methods are stable across noise types"),
                    (Heterogeneous, Limited, "domain shifts act as hidden confounders"),
                    (MissingTolerant, Moderate, "no specific mechanism for incomplete data"),
                    (DiscreteMix, Strong, "local graphs limit error propagation in discrete settings"),
                ],
            ),
            (
                AlgorithmId::GrangerPairwise,
                vec![tsk, Requirement::MaxVars(200), Requirement::WithinBudget],
                vec![
                    (Linear, Strong, "pairwise Granger tests perform strongly across settings"),
                    (Nonlinear, Limited, "linear autoregressions miss nonlinear dynamics"),
                    (Sparse, Strong, "pairwise Granger tests perform strongly across settings"),
                    (Dense, Moderate, "indirect paths create spurious pairwise links"),
                    (LargeP, Moderate, "quadratic number of small regressions"),
                    (NonGaussian, Moderate, "F tests are approximate under non-Gaussian noise"),
                ],
            ),
            (
                AlgorithmId::GrangerMultivariate,
                vec![tsk, Requirement::MaxVars(100), Requirement::WithinBudget],
                vec![
                    (Linear, Strong, "conditioning on all series removes indirect links"),
                    (Nonlinear, Limited, "linear autoregressions miss nonlinear dynamics"),
                    (Sparse, Strong, "conditioning on all series removes indirect links"),
                    (Dense, Strong, "conditioning on all series removes indirect links"),
                    (LargeP, Limited, "full VAR regressions lose power as series are added"),
                    (NonGaussian, Moderate, "F tests are approximate under non-Gaussian noise"),
                ],
            ),
            (
                AlgorithmId::VarLingam,
                vec![tsk, Requirement::NonGaussianNoise, Requirement::MaxVars(1000), Requirement::WithinBudget],
                vec![
                    (Linear, Strong, "linear VAR with an identifiable instantaneous part"),
                    (Nonlinear, Poor, "linear model"),
                    (Sparse, Strong, "resilient to variations in edge density"),
                    (Dense, Robust, "resilient to variations in edge density"),
                    (LargeP, Robust, "the only method finishing on very large series sets"),
                    (NonGaussian, Robust, "preferred method for non-Gaussian noise"),
                ],
            ),
            (
                AlgorithmId::Dynotears,
                vec![tsk, Requirement::MaxVars(100), Requirement::WithinBudget],
                vec![
                    (Linear, Robust, "strong candidate for linear time series, accurate and efficient"),
                    (Nonlinear, Poor, "linear model"),
                    (Sparse, Strong, "resilient to variations in edge density"),
                    (Dense, Robust, "resilient to variations in edge density"),
                    (LargeP, Limited, "matrix-exponential constraint is cubic in the variable count"),
                    (NonGaussian, Moderate, "least-squares score ignores non-Gaussianity"),
                ],
            ),
        ];
        let entries = table
            .into_iter()
            .map(|(id, hard_requirements, ratings)| AlgorithmEntry {
                id,
                family: id.family(),
                data_kind: if id.is_time_series() { DataKind::TimeSeries } else { DataKind::Tabular },
                hard_requirements,
                ratings: cells(&ratings),
                default_config: default_params(id),
                benchmark_rows: rows.get(&id).cloned().unwrap_or_default(),
            })
            .collect();
        Registry { entries }
    }

    pub fn get(&self, id: AlgorithmId) -> Option<&AlgorithmEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: AlgorithmId,
    pub requirement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub candidates: Vec<AlgorithmId>,
    pub excluded: Vec<Exclusion>,
    pub warnings: Vec<String>,
}

/// Drop entries whose hard requirements fail. If every entry fails, the one
/// with the fewest violations (then lowest id) is kept with a warning.
pub fn filter_algorithms(profile: &DatasetProfile, registry: &Registry) -> FilterOutcome {
    let mut candidates = Vec::new();
    let mut excluded = Vec::new();
    let mut fewest: Option<(usize, AlgorithmId)> = None;
    for e in &registry.entries {
        let v = e.violations(profile);
        if v.is_empty() {
            candidates.push(e.id);
        } else {
            if fewest.is_none_or(|(k, id)| (v.len(), e.id) < (k, id)) {
                fewest = Some((v.len(), e.id));
            }
            excluded.extend(v.iter().map(|r| Exclusion { id: e.id, requirement: r.describe() }));
        }
    }
    let mut warnings = Vec::new();
    if candidates.is_empty() {
        if let Some((_, id)) = fewest {
            warnings.push(format!("every algorithm violates a hard requirement; keeping {id}, the least-violating entry"));
            log::warn!("{}", warnings[0]);
            excluded.retain(|x| x.id != id);
            candidates.push(id);
        }
    }
    candidates.sort();
    FilterOutcome { candidates, excluded, warnings }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub id: AlgorithmId,
    pub theoretical: f64,
    pub empirical: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    /// Weight of the normalized theoretical score; the empirical score gets
    /// the remainder.
    pub theoretical_weight: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig { theoretical_weight: 0.5 }
    }
}

fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 1.0 }).collect()
}

/// Theoretical score: sum of rating ordinals over active conditions.
/// Empirical score: mean F1 of the nearest benchmark row (0 without rows).
/// Both are min-max normalized over the candidates, blended, and sorted
/// descending with ties broken by id.
pub fn rank_algorithms(
    candidates: &[AlgorithmId],
    profile: &DatasetProfile,
    registry: &Registry,
    cfg: &SelectorConfig,
) -> Vec<RankedCandidate> {
    let active = active_conditions(profile);
    let fp = Fingerprint::from_profile(profile);
    let entries: Vec<&AlgorithmEntry> = candidates.iter().filter_map(|&id| registry.get(id)).collect();
    let theo: Vec<f64> = entries.iter().map(|e| active.iter().map(|&c| e.rating(c).ordinal() as f64).sum()).collect();
    let emp: Vec<f64> = entries.iter().map(|e| e.nearest_row(&fp).map_or(0.0, |r| r.mean_f1)).collect();
    let (nt, ne) = (min_max(&theo), min_max(&emp));
    let w = cfg.theoretical_weight.clamp(0.0, 1.0);
    let mut out: Vec<RankedCandidate> = entries
        .iter()
        .enumerate()
        .map(|(k, e)| RankedCandidate { id: e.id, theoretical: theo[k], empirical: emp[k], combined: w * nt[k] + (1.0 - w) * ne[k] })
        .collect();
    out.sort_by(|a, b| b.combined.total_cmp(&a.combined).then(a.id.cmp(&b.id)));
    out
}

/// Rule table mapping a profile to hyperparameters, with one rationale line
/// per rule applied.
pub fn configure_hyperparameters(id: AlgorithmId, profile: &DatasetProfile) -> Result<(ParamMap, Vec<String>)> {
    let mut p = default_params(id);
    let mut why = Vec::new();
    let lag = profile.suggested_lag.unwrap_or(3).clamp(1, 20);
    let lag_reason = match profile.suggested_lag {
        Some(l) if l == lag => format!("lag = {lag} from the estimated lag order"),
        Some(l) => format!("lag = {lag}: estimated lag {l} clamped to [1, 20]"),
        None => format!("lag = {lag}: no lag estimate, using the default"),
    };
    match id {
        AlgorithmId::Pc | AlgorithmId::IambCpdag => {
            let alpha = if profile.n_samples > 5000 { 0.01 } else { 0.05 };
            p.insert("alpha".into(), alpha.into());
            why.push(if alpha == 0.01 {
                format!("alpha = 0.01: n = {} > 5000, tests have power to spare", profile.n_samples)
            } else {
                "alpha = 0.05: default significance level".into()
            });
            let (test, reason) = if profile.discrete_ratio >= 1.0 {
                ("chi_squared", "all columns are discrete")
            } else if profile.linearity == Linearity::Nonlinear {
                ("rank_fisher_z", "relations look nonlinear, rank-transform first")
            } else {
                ("fisher_z", "continuous data with linear or unknown relations")
            };
            p.insert("test".into(), test.into());
            why.push(format!("test = {test}: {reason}"));
        }
        AlgorithmId::NotearsLinear => {
            let dense = profile.edge_density.is_some_and(|d| d >= DENSE_THRESHOLD);
            let lambda = if dense { 0.05 } else { 0.1 };
            p.insert("lambda1".into(), lambda.into());
            why.push(if dense {
                "lambda1 = 0.05: halved because the graph looks dense".into()
            } else {
                "lambda1 = 0.1: default sparsity penalty".into()
            });
        }
        AlgorithmId::Dynotears | AlgorithmId::VarLingam => {
            p.insert("lag".into(), lag.into());
            why.push(lag_reason);
        }
        AlgorithmId::GrangerPairwise | AlgorithmId::GrangerMultivariate => {
            p.insert("max_lag".into(), lag.into());
            why.push(format!("max_{lag_reason}"));
        }
        AlgorithmId::ScoreSearch => why.push("BIC penalty multiplier 1: default".into()),
        AlgorithmId::DirectLingam => why.push("no hyperparameters".into()),
    }
    Ok((p, why))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub filtered_out: Vec<Exclusion>,
    pub ranked: Vec<RankedCandidate>,
    pub chosen: AlgorithmId,
    pub config: ParamMap,
    pub rationale: Vec<String>,
    /// Set when the all-fail fallback fired.
    pub warnings: Vec<String>,
}

/// Filter, rank and configure. Deterministic in its inputs.
pub fn select_algorithm(profile: &DatasetProfile, registry: &Registry, cfg: &SelectorConfig) -> Result<SelectionTrace> {
    if registry.entries.is_empty() {
        return Err(Error::InvalidParameter("empty registry".into()));
    }
    let f = filter_algorithms(profile, registry);
    let ranked = rank_algorithms(&f.candidates, profile, registry, cfg);
    let top = ranked.first().ok_or_else(|| Error::InvalidParameter("no rankable candidate".into()))?.clone();
    let (config, rules) = configure_hyperparameters(top.id, profile)?;
    let active = active_conditions(profile);
    let mut rationale = Vec::new();
    let names: Vec<String> = active.iter().map(|c| format!("{c:?}")).collect();
    rationale.push(format!(
        "profile: {} {:?} data, {} samples x {} variables; active conditions: {}",
        if profile.data_kind == DataKind::TimeSeries { "time-series" } else { "tabular" },
        profile.linearity,
        profile.n_samples,
        profile.n_vars,
        if names.is_empty() { "none".to_string() } else { names.join(", ") }
    ));
    for x in &f.excluded {
        rationale.push(format!("excluded {}: {}", x.id, x.requirement));
    }
    let entry = registry.get(top.id).expect("ranked ids come from the registry");
    rationale.push(format!(
        "chose {}: combined {:.3} (theoretical {:.0}, benchmark F1 {:.3})",
        top.id, top.combined, top.theoretical, top.empirical
    ));
    for c in &active {
        if let Some(cell) = entry.ratings.get(c) {
            rationale.push(format!("{} rated {:?} for {:?}: {}", top.id, cell.rating, c, cell.evidence));
        }
    }
    if let Some(r) = ranked.get(1) {
        rationale.push(format!("runner-up {}: combined {:.3}", r.id, r.combined));
    }
    rationale.extend(rules.into_iter().map(|r| format!("config: {r}")));
    Ok(SelectionTrace { filtered_out: f.excluded, ranked, chosen: top.id, config, rationale, warnings: f.warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorCandidate {
    pub id: AlgorithmId,
    pub scores: RankedCandidate,
    pub ratings: BTreeMap<Condition, Rating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorRequest {
    pub profile: DatasetProfile,
    pub candidates: Vec<AdvisorCandidate>,
    pub trace: SelectionTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorResponse {
    pub chosen: String,
    pub rationale: String,
}

/// External reviewer of a selection, e.g. an HTTP endpoint.
pub trait Advisor: Send + Sync {
    fn advise(&self, request: &AdvisorRequest) -> std::result::Result<AdvisorResponse, String>;
}

pub fn advisor_request(trace: &SelectionTrace, profile: &DatasetProfile, registry: &Registry) -> AdvisorRequest {
    let candidates = trace
        .ranked
        .iter()
        .map(|r| AdvisorCandidate {
            id: r.id,
            scores: r.clone(),
            ratings: registry.get(r.id).map(|e| e.ratings.iter().map(|(c, v)| (*c, v.rating)).collect()).unwrap_or_default(),
        })
        .collect();
    AdvisorRequest { profile: profile.clone(), candidates, trace: trace.clone() }
}

/// Let an advisor swap the choice. The suggestion is accepted only if it
/// names a ranked (non-filtered) candidate; otherwise, or on any advisor
/// failure, the trace is returned unchanged apart from a logged warning.
pub fn advisor_rerank(
    trace: SelectionTrace,
    profile: &DatasetProfile,
    registry: &Registry,
    advisor: Option<&dyn Advisor>,
) -> SelectionTrace {
    let Some(advisor) = advisor else { return trace };
    let resp = match advisor.advise(&advisor_request(&trace, profile, registry)) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("advisor unavailable, keeping {}: {e}", trace.chosen);
            return trace;
        }
    };
    let id = match AlgorithmId::parse(resp.chosen.trim()) {
        Ok(id) if trace.ranked.iter().any(|r| r.id == id) => id,
        _ => {
            log::warn!("advisor proposed `{}`, which is not an eligible candidate; keeping {}", resp.chosen, trace.chosen);
            return trace;
        }
    };
    if id == trace.chosen {
        let mut t = trace;
        t.rationale.push(format!("advisor agreed: {}", resp.rationale));
        return t;
    }
    let Ok((config, rules)) = configure_hyperparameters(id, profile) else { return trace };
    let mut t = trace;
    t.rationale.push(format!("advisor swapped {} for {}: {}", t.chosen, id, resp.rationale));
    t.rationale.extend(rules.into_iter().map(|r| format!("config: {r}")));
    t.chosen = id;
    t.config = config;
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn profile(kind: DataKind, lin: Linearity, noise: NoiseVerdict) -> DatasetProfile {
        DatasetProfile {
            n_samples: 1000,
            n_vars: 10,
            data_kind: kind,
            discrete_ratio: 0.0,
            missing_rate: 0.0,
            linearity: lin,
            gaussian_noise: noise,
            heterogeneous: None,
            edge_density: Some(0.3),
            stationary: None,
            suggested_lag: None,
            runtime_budget_seconds: 120.0,
        }
    }

    #[test]
    fn registry_lists_each_algorithm_once() {
        let r = Registry::builtin();
        let mut ids: Vec<AlgorithmId> = r.entries.iter().map(|e| e.id).collect();
        ids.sort();
        assert_eq!(ids, AlgorithmId::ALL.to_vec());
        assert!(r.entries.iter().all(|e| !e.benchmark_rows.is_empty()), "embedded benchmark rows missing");
    }

    #[test]
    fn rating_order() {
        assert!(Rating::Robust > Rating::Strong && Rating::Strong > Rating::Moderate);
        assert!(Rating::Moderate > Rating::Limited && Rating::Limited > Rating::Poor);
        assert_eq!(Rating::Robust.ordinal(), 5);
    }

    #[test]
    fn time_series_excludes_tabular() {
        let f = filter_algorithms(&profile(DataKind::TimeSeries, Linearity::Unknown, NoiseVerdict::Gaussian), &Registry::builtin());
        assert!(f.candidates.iter().all(|id| id.is_time_series()));
        assert!(!f.candidates.contains(&AlgorithmId::VarLingam));
    }

    #[test]
    fn discrete_excludes_continuous_only() {
        let mut p = profile(DataKind::Tabular, Linearity::Linear, NoiseVerdict::Unknown);
        p.discrete_ratio = 0.4;
        let f = filter_algorithms(&p, &Registry::builtin());
        assert!(!f.candidates.contains(&AlgorithmId::NotearsLinear));
        assert!(!f.candidates.contains(&AlgorithmId::DirectLingam));
        assert!(f.candidates.contains(&AlgorithmId::Pc));
    }

    #[test]
    fn large_problem_keeps_scalable_entries() {
        let mut p = profile(DataKind::Tabular, Linearity::Linear, NoiseVerdict::Gaussian);
        p.n_vars = 400;
        p.runtime_budget_seconds = 60.0;
        let f = filter_algorithms(&p, &Registry::builtin());
        assert!(f.warnings.is_empty());
        assert!(!f.candidates.is_empty());
        assert!(!f.candidates.contains(&AlgorithmId::NotearsLinear));
    }

    #[test]
    fn all_fail_keeps_least_violating() {
        let mut p = profile(DataKind::Tabular, Linearity::Linear, NoiseVerdict::Gaussian);
        p.n_vars = 5000;
        p.runtime_budget_seconds = 1e-6;
        let f = filter_algorithms(&p, &Registry::builtin());
        assert_eq!(f.candidates.len(), 1);
        assert_eq!(f.warnings.len(), 1);
    }

    #[test]
    fn paper_recommendations() {
        let r = Registry::builtin();
        let c = SelectorConfig::default();
        let pick = |p: DatasetProfile| select_algorithm(&p, &r, &c).unwrap().chosen;
        let lg = pick(profile(DataKind::Tabular, Linearity::Linear, NoiseVerdict::Gaussian));
        assert!([AlgorithmId::NotearsLinear, AlgorithmId::ScoreSearch].contains(&lg), "{lg}");
        assert_eq!(pick(profile(DataKind::Tabular, Linearity::Linear, NoiseVerdict::NonGaussian)), AlgorithmId::DirectLingam);
        assert_eq!(pick(profile(DataKind::TimeSeries, Linearity::Unknown, NoiseVerdict::NonGaussian)), AlgorithmId::VarLingam);
        assert_eq!(pick(profile(DataKind::TimeSeries, Linearity::Unknown, NoiseVerdict::Gaussian)), AlgorithmId::Dynotears);
    }

    #[test]
    fn config_rules() {
        let mut p = profile(DataKind::Tabular, Linearity::Linear, NoiseVerdict::Gaussian);
        p.n_samples = 10_000;
        let (c, why) = configure_hyperparameters(AlgorithmId::Pc, &p).unwrap();
        assert_eq!(c["alpha"], 0.01);
        assert_eq!(why.len(), 2);
        p.linearity = Linearity::Nonlinear;
        assert_eq!(configure_hyperparameters(AlgorithmId::Pc, &p).unwrap().0["test"], "rank_fisher_z");
        let mut t = profile(DataKind::TimeSeries, Linearity::Unknown, NoiseVerdict::Gaussian);
        t.suggested_lag = Some(3);
        assert_eq!(configure_hyperparameters(AlgorithmId::Dynotears, &t).unwrap().0["lag"], 3);
        t.suggested_lag = Some(40);
        assert_eq!(configure_hyperparameters(AlgorithmId::Dynotears, &t).unwrap().0["lag"], 20);
    }

    struct Fixed(&'static str);
    impl Advisor for Fixed {
        fn advise(&self, _: &AdvisorRequest) -> std::result::Result<AdvisorResponse, String> {
            Ok(AdvisorResponse { chosen: self.0.into(), rationale: "domain prior".into() })
        }
    }
    struct Down;
    impl Advisor for Down {
        fn advise(&self, _: &AdvisorRequest) -> std::result::Result<AdvisorResponse, String> {
            Err("connection refused".into())
        }
    }

    #[test]
    fn advisor_contract() {
        let r = Registry::builtin();
        let p = profile(DataKind::Tabular, Linearity::Linear, NoiseVerdict::Gaussian);
        let t = select_algorithm(&p, &r, &SelectorConfig::default()).unwrap();
        assert_eq!(advisor_rerank(t.clone(), &p, &r, None), t);
        assert_eq!(advisor_rerank(t.clone(), &p, &r, Some(&Down)), t);
        assert_eq!(advisor_rerank(t.clone(), &p, &r, Some(&Fixed("direct_lingam"))), t);
        assert_eq!(advisor_rerank(t.clone(), &p, &r, Some(&Fixed("nonsense"))), t);
        let runner_up = t.ranked[1].id;
        let swapped = advisor_rerank(t.clone(), &p, &r, Some(&Fixed(runner_up.as_str())));
        assert_eq!(swapped.chosen, runner_up);
        assert!(swapped.rationale.last().unwrap().contains("config") || swapped.rationale.iter().any(|l| l.contains("domain prior")));
    }

    #[test]
    fn selection_is_deterministic_and_valid() {
        let r = Registry::builtin();
        let p = profile(DataKind::Tabular, Linearity::Nonlinear, NoiseVerdict::Unknown);
        let a = select_algorithm(&p, &r, &SelectorConfig::default()).unwrap();
        assert_eq!(a, select_algorithm(&p, &r, &SelectorConfig::default()).unwrap());
        assert!(a.ranked.iter().any(|x| x.id == a.chosen));
        assert!(!a.filtered_out.iter().any(|x| x.id == a.chosen));
        assert!(r.get(a.chosen).unwrap().violations(&p).is_empty());
    }
}
