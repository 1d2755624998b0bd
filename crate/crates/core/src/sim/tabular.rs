//! Tabular structural equation model simulation.
//!
//! Samples are generated in topological order from a random DAG, then passed
//! through the corruption stages in a fixed order: discretization,
//! measurement error, missingness, domain shift. Each stage draws from its
//! own seed stream, so switching one stage off leaves the others unchanged.

use super::{noise::sample_noise, signed_uniform, NoiseKind};
use crate::data::{column_moments, ColumnMeta, Dataset};
use crate::error::{Error, Result};
use crate::graph::{erdos_renyi_dag, Dag};
use crate::rng::{self, Rng};
use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const WEIGHT_LO: f64 = 0.5;
pub const WEIGHT_HI: f64 = 2.0;
pub const MLP_HIDDEN: usize = 100;
pub const DOMAIN_EFFECT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionType {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabularScenario {
    pub n_nodes: usize,
    pub n_samples: usize,
    pub edge_prob: f64,
    pub function_type: FunctionType,
    pub noise: NoiseKind,
    pub noise_scale: f64,
    pub discrete_ratio: f64,
    pub discrete_cardinality: usize,
    pub measurement_error_ratio: f64,
    pub measurement_error_sd: f64,
    pub missing_rate: f64,
    pub n_domains: usize,
    pub seed: u64,
}

impl Default for TabularScenario {
    /// 10 nodes, 1000 samples, edge probability 0.22, linear, unit Gaussian
    /// noise, no corruption.
    fn default() -> Self {
        TabularScenario {
            n_nodes: 10,
            n_samples: 1000,
            edge_prob: 0.22,
            function_type: FunctionType::Linear,
            noise: NoiseKind::Gaussian,
            noise_scale: 1.0,
            discrete_ratio: 0.0,
            discrete_cardinality: 3,
            measurement_error_ratio: 0.0,
            measurement_error_sd: 0.0,
            missing_rate: 0.0,
            n_domains: 1,
            seed: 0,
        }
    }
}

impl TabularScenario {
    pub fn validate(&self) -> Result<()> {
        let ratio = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")))
            }
        };
        ratio("edge_prob", self.edge_prob)?;
        ratio("discrete_ratio", self.discrete_ratio)?;
        ratio("measurement_error_ratio", self.measurement_error_ratio)?;
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::RateOutOfRange(self.missing_rate));
        }
        if self.n_nodes == 0 || self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_nodes and n_samples must be positive".into()));
        }
        if self.noise_scale <= 0.0 || self.measurement_error_sd < 0.0 {
            return Err(Error::InvalidParameter("noise scales must be positive".into()));
        }
        if self.discrete_cardinality < 2 || self.n_domains == 0 {
            return Err(Error::InvalidParameter("cardinality >= 2 and n_domains >= 1 required".into()));
        }
        Ok(())
    }
}

struct MlpUnit {
    input: DMatrix<f64>, // parents x hidden
    output: Vec<f64>,    // hidden
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draw a DAG and a clean SEM sample, then apply the configured corruptions.
pub fn simulate_tabular(s: &TabularScenario) -> Result<(Dag, Dataset)> {
    s.validate()?;
    let p = s.n_nodes;
    let n = s.n_samples;
    let dag = erdos_renyi_dag(p, s.edge_prob, rng::derive_seed(s.seed, 0));
    let mut wrng = rng::child(s.seed, 1);
    let mut nrng = rng::child(s.seed, 2);

    let mut weights = DMatrix::zeros(p, p);
    for (i, j) in dag.edges() {
        weights[(i, j)] = signed_uniform(&mut wrng, WEIGHT_LO, WEIGHT_HI);
    }
    let mlps: Vec<Option<MlpUnit>> = (0..p)
        .map(|j| {
            let pa = dag.parents(j);
            (s.function_type == FunctionType::Mlp && !pa.is_empty()).then(|| MlpUnit {
                input: DMatrix::from_fn(pa.len(), MLP_HIDDEN, |_, _| signed_uniform(&mut wrng, WEIGHT_LO, WEIGHT_HI)),
                output: (0..MLP_HIDDEN).map(|_| signed_uniform(&mut wrng, WEIGHT_LO, WEIGHT_HI)).collect(),
            })
        })
        .collect();

    let mut x = DMatrix::zeros(n, p);
    for j in dag.topological_order() {
        let e = sample_noise(s.noise, s.noise_scale, n, &mut nrng);
        let pa = dag.parents(j);
        for r in 0..n {
            let signal = match &mlps[j] {
                None => pa.iter().map(|&i| weights[(i, j)] * x[(r, i)]).sum::<f64>(),
                Some(unit) => (0..MLP_HIDDEN)
                    .map(|h| {
                        let z: f64 = pa.iter().enumerate().map(|(k, &i)| unit.input[(k, h)] * x[(r, i)]).sum();
                        unit.output[h] * sigmoid(z)
                    })
                    .sum(),
            };
            x[(r, j)] = signal + e[r];
        }
    }

    let truth = if s.function_type == FunctionType::Linear {
        Dag::from_weights(&weights)?
    } else {
        dag
    };
    let mut data = Dataset::continuous(x);

    if s.discrete_ratio > 0.0 {
        data = discretize_columns(&data, &truth, s.discrete_ratio, s.discrete_cardinality, &mut rng::child(s.seed, 3));
    }
    if s.measurement_error_ratio > 0.0 && s.measurement_error_sd > 0.0 {
        data = apply_measurement_error(
            &data,
            s.measurement_error_ratio,
            s.measurement_error_sd,
            &mut rng::child(s.seed, 4),
        );
    }
    if s.missing_rate > 0.0 {
        data = apply_missing(&data, s.missing_rate, &mut rng::child(s.seed, 5))?;
    }
    if s.n_domains > 1 {
        data = apply_domain_shift(&data, &truth, s.n_domains, s.function_type, &mut rng::child(s.seed, 6));
    }
    Ok((truth, data))
}

/// Per-category slope and intercept of the logit map.
#[derive(Debug, Clone)]
pub struct LogitMap {
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl LogitMap {
    pub fn random(cardinality: usize, rng: &mut Rng) -> Self {
        LogitMap {
            slopes: (0..cardinality).map(|_| signed_uniform(rng, WEIGHT_LO, WEIGHT_HI)).collect(),
            intercepts: vec![0.0; cardinality],
        }
    }

    pub fn zero(cardinality: usize) -> Self {
        LogitMap { slopes: vec![0.0; cardinality], intercepts: vec![0.0; cardinality] }
    }
}

/// Categorical labels for standardized values `z`: logit_k = slope_k z +
/// intercept_k + N(0, 1), label ~ softmax(logits).
pub fn sample_categorical(z: &[f64], map: &LogitMap, rng: &mut Rng) -> Vec<usize> {
    let k = map.slopes.len();
    let mut logits = vec![0.0; k];
    z.iter()
        .map(|&v| {
            if v.is_nan() {
                return usize::MAX;
            }
            for c in 0..k {
                let eps: f64 = StandardNormal.sample(rng);
                logits[c] = map.slopes[c] * v + map.intercepts[c] + eps;
            }
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (c, wc) in w.iter().enumerate() {
                if u < *wc {
                    return c;
                }
                u -= wc;
            }
            k - 1
        })
        .collect()
}

/// Turn `floor(ratio * p)` randomly chosen continuous columns into
/// categorical columns. Each column's own (standardized) value, which already
/// carries its parents' influence, drives the logits; children were
/// generated from the latent continuous value.
pub fn discretize_columns(data: &Dataset, _dag: &Dag, ratio: f64, cardinality: usize, rng: &mut Rng) -> Dataset {
    let p = data.n_columns();
    let k = (ratio * p as f64).floor() as usize;
    if k == 0 {
        return data.clone();
    }
    let mut out = data.clone();
    let mut chosen = sample_indices(rng, p, k).into_vec();
    chosen.sort_unstable();
    let (means, sds) = column_moments(&data.values);
    for c in chosen {
        let z: Vec<f64> = data
            .values
            .column(c)
            .iter()
            .map(|&v| if sds[c] > 0.0 { (v - means[c]) / sds[c] } else { v - means[c] })
            .collect();
        let map = LogitMap::random(cardinality, rng);
        let labels = sample_categorical(&z, &map, rng);
        for (r, l) in labels.into_iter().enumerate() {
            out.values[(r, c)] = if l == usize::MAX { f64::NAN } else { l as f64 };
        }
        out.columns[c] = ColumnMeta::discrete(data.columns[c].name.clone(), cardinality);
    }
    out
}

/// Additive Gaussian noise with standard deviation `sd` on
/// `floor(column_ratio * p)` randomly chosen continuous columns.
pub fn apply_measurement_error(data: &Dataset, column_ratio: f64, sd: f64, rng: &mut Rng) -> Dataset {
    let continuous: Vec<usize> = (0..data.n_columns()).filter(|&c| !data.is_discrete(c)).collect();
    let k = ((column_ratio * data.n_columns() as f64).floor() as usize).min(continuous.len());
    if k == 0 || sd == 0.0 {
        return data.clone();
    }
    let mut out = data.clone();
    let mut picks = sample_indices(rng, continuous.len(), k).into_vec();
    picks.sort_unstable();
    for idx in picks {
        let c = continuous[idx];
        for r in 0..data.n_samples() {
            let eps: f64 = StandardNormal.sample(rng);
            out.values[(r, c)] += sd * eps;
        }
    }
    out
}

/// Each cell independently becomes missing with probability `rate`.
pub fn apply_missing(data: &Dataset, rate: f64, rng: &mut Rng) -> Result<Dataset> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::RateOutOfRange(rate));
    }
    if rate == 0.0 {
        return Ok(data.clone());
    }
    let mut out = data.clone();
    for c in 0..data.n_columns() {
        for r in 0..data.n_samples() {
            if rng.random::<f64>() < rate {
                out.values[(r, c)] = f64::NAN;
            }
        }
    }
    Ok(out)
}

/// Split rows evenly into `n_domains` consecutive blocks and record the
/// domain index. A random half of the continuous variables (at least one)
/// receives a domain effect of strength proportional to the domain index:
/// a constant offset for linear scenarios, the added square of the
/// standardized value for MLP scenarios.
pub fn apply_domain_shift(
    data: &Dataset,
    _dag: &Dag,
    n_domains: usize,
    function_type: FunctionType,
    rng: &mut Rng,
) -> Dataset {
    let n = data.n_samples();
    let mut out = data.clone();
    let domains: Vec<usize> = (0..n).map(|r| r * n_domains / n.max(1)).collect();
    if n_domains <= 1 {
        out.domain_index = Some(domains);
        return out;
    }
    let continuous: Vec<usize> = (0..data.n_columns()).filter(|&c| !data.is_discrete(c)).collect();
    let mut affected: Vec<usize> = continuous.iter().copied().filter(|_| rng.random::<bool>()).collect();
    if affected.is_empty() && !continuous.is_empty() {
        affected.push(continuous[rng.random_range(0..continuous.len())]);
    }
    let (means, sds) = column_moments(&data.values);
    for &c in &affected {
        for r in 0..n {
            let v = data.values[(r, c)];
            if v.is_nan() {
                continue;
            }
            let d = domains[r] as f64;
            out.values[(r, c)] = match function_type {
                FunctionType::Linear => v + DOMAIN_EFFECT * d,
                FunctionType::Mlp => {
                    let z = if sds[c] > 0.0 { (v - means[c]) / sds[c] } else { 0.0 };
                    v + DOMAIN_EFFECT * d * z * z
                }
            };
        }
    }
    out.domain_index = Some(domains);
    out
}
