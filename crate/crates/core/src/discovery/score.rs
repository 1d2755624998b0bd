//! Greedy BIC search in DAG space: forward edge additions, then backward
//! deletions and reversals. Output is the equivalence class of the final DAG.

use crate::cancel::CancelToken;
use crate::data::{center, Dataset};
use crate::error::{Error, Result};
use crate::graph::{dag_to_cpdag, Cpdag, Dag, DiGraph};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const VARIANCE_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub penalty_multiplier: f64,
    pub max_in_degree: Option<usize>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig { penalty_multiplier: 1.0, max_in_degree: None }
    }
}

/// Gaussian BIC scorer over a fixed sample covariance (divisor n).
pub struct BicScorer {
    cov: DMatrix<f64>,
    n: usize,
    penalty: f64,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl BicScorer {
    pub fn new(data: &Dataset, cfg: &ScoreConfig) -> Result<Self> {
        data.require_complete()?;
        if !(cfg.penalty_multiplier > 0.0) {
            return Err(Error::InvalidParameter("penalty_multiplier must be positive".into()));
        }
        let n = data.n_samples();
        let c = center(&data.values);
        Ok(BicScorer { cov: c.transpose() * &c / n as f64, n, penalty: cfg.penalty_multiplier, cache: HashMap::new() })
    }

    /// Residual variance of `j` regressed on `parents`, floored.
    pub fn residual_variance(&self, j: usize, parents: &[usize]) -> f64 {
        let mut v = self.cov[(j, j)];
        if !parents.is_empty() {
            let k = parents.len();
            let spp = DMatrix::from_fn(k, k, |a, b| self.cov[(parents[a], parents[b])]);
            let spj = nalgebra::DVector::from_fn(k, |a, _| self.cov[(parents[a], j)]);
            let sol = match spp.clone().cholesky() {
                Some(ch) => ch.solve(&spj),
                None => spp.svd(true, true).solve(&spj, 1e-12).unwrap_or_else(|_| spj.clone() * 0.0),
            };
            v -= spj.dot(&sol);
        }
        v.max(VARIANCE_FLOOR)
    }

    pub fn local(&mut self, j: usize, parents: &[usize]) -> f64 {
        let mut key = parents.to_vec();
        key.sort_unstable();
        if let Some(&s) = self.cache.get(&(j, key.clone())) {
            return s;
        }
        let n = self.n as f64;
        let s = -0.5 * n * self.residual_variance(j, &key).ln() - self.penalty * 0.5 * n.ln() * (key.len() as f64 + 1.0);
        self.cache.insert((j, key), s);
        s
    }

    pub fn total(&mut self, g: &DiGraph) -> f64 {
        (0..g.n_nodes()).map(|j| self.local(j, &g.parents(j))).sum()
    }
}

pub fn local_bic(data: &Dataset, cfg: &ScoreConfig, j: usize, parents: &[usize]) -> Result<f64> {
    Ok(BicScorer::new(data, cfg)?.local(j, parents))
}

pub fn total_bic(data: &Dataset, cfg: &ScoreConfig, dag: &Dag) -> Result<f64> {
    Ok(BicScorer::new(data, cfg)?.total(dag))
}

pub fn score_search(data: &Dataset, cfg: &ScoreConfig) -> Result<Cpdag> {
    score_search_cancellable(data, cfg, &CancelToken::never())
}

pub fn score_search_cancellable(data: &Dataset, cfg: &ScoreConfig, cancel: &CancelToken) -> Result<Cpdag> {
    let dag = hill_climb(data, cfg, cancel)?.0;
    dag_to_cpdag(&dag).with_labels(data.names())
}

fn creates_cycle(g: &DiGraph, i: usize, j: usize) -> bool {
    // adding i -> j closes a cycle iff i is reachable from j
    let mut stack = vec![j];
    let mut seen = vec![false; g.n_nodes()];
    while let Some(v) = stack.pop() {
        if v == i {
            return true;
        }
        if !std::mem::replace(&mut seen[v], true) {
            stack.extend(g.children(v));
        }
    }
    false
}

fn with(parents: &[usize], add: usize) -> Vec<usize> {
    let mut p = parents.to_vec();
    p.push(add);
    p
}

fn without(parents: &[usize], drop: usize) -> Vec<usize> {
    parents.iter().copied().filter(|&v| v != drop).collect()
}

/// Runs both phases and returns the final DAG with the score after every
/// accepted move (first entry is the empty graph).
pub fn hill_climb(data: &Dataset, cfg: &ScoreConfig, cancel: &CancelToken) -> Result<(Dag, Vec<f64>)> {
    let mut sc = BicScorer::new(data, cfg)?;
    let n = data.n_columns();
    let mut g = DiGraph::new(n);
    let mut trace = vec![sc.total(&g)];
    let mut local: Vec<f64> = (0..n).map(|j| sc.local(j, &[])).collect();

    // forward
    loop {
        cancel.check()?;
        let mut best: Option<(f64, usize, usize)> = None;
        for j in 0..n {
            let pa = g.parents(j);
            if cfg.max_in_degree.is_some_and(|m| pa.len() >= m) {
                continue;
            }
            for i in 0..n {
                if i == j || g.is_adjacent(i, j) {
                    continue;
                }
                let gain = sc.local(j, &with(&pa, i)) - local[j];
                if gain > MIN_GAIN && best.is_none_or(|b| gain > b.0) && !creates_cycle(&g, i, j) {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        g.add_edge(i, j);
        local[j] = sc.local(j, &g.parents(j));
        trace.push(local.iter().sum());
    }

    // backward: deletions and reversals
    loop {
        cancel.check()?;
        let mut best: Option<(f64, usize, usize, bool)> = None;
        for (i, j) in g.edges() {
            let pj = g.parents(j);
            let del = sc.local(j, &without(&pj, i)) - local[j];
            if del > MIN_GAIN && best.is_none_or(|b| del > b.0) {
                best = Some((del, i, j, false));
            }
            if cfg.max_in_degree.is_some_and(|m| g.parents(i).len() >= m) {
                continue;
            }
            let rev = del + sc.local(i, &with(&g.parents(i), j)) - local[i];
            if rev > MIN_GAIN && best.is_none_or(|b| rev > b.0) {
                let mut h = g.clone();
                h.remove_edge(i, j);
                if !creates_cycle(&h, j, i) {
                    best = Some((rev, i, j, true));
                }
            }
        }
        let Some((_, i, j, reverse)) = best else { break };
        g.remove_edge(i, j);
        if reverse {
            g.add_edge(j, i);
        }
        local[i] = sc.local(i, &g.parents(i));
        local[j] = sc.local(j, &g.parents(j));
        trace.push(local.iter().sum());
    }
    let dag = Dag::new(g)?.with_labels(data.names())?;
    Ok((dag, trace))
}
