//! Graph tuning after discovery: bootstrap edge confidence, threshold
//! refinement and user constraints.

use crate::algorithms::{run_algorithm, AlgorithmId, ParamMap};
use crate::cancel::CancelToken;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::DiGraph;
use crate::parallel::{map_range, Parallelism};
use crate::rng;
use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const DEFAULT_REPLICATES: usize = 100;
pub const DEFAULT_HI: f64 = 0.9;
pub const DEFAULT_LO: f64 = 0.1;

/// Directed bootstrap frequencies: `frequency[i][j]` is the share of
/// successful replicates containing `i -> j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeConfidence {
    pub labels: Vec<String>,
    pub frequency: Vec<Vec<f64>>,
    /// Replicates that completed and were counted.
    pub b_samples: usize,
    /// Replicates whose algorithm run failed.
    pub failed: usize,
}

impl EdgeConfidence {
    pub fn from_matrix(labels: Vec<String>, m: &DMatrix<f64>, b_samples: usize, failed: usize) -> Self {
        let frequency = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
        EdgeConfidence { labels, frequency, b_samples, failed }
    }

    pub fn n_nodes(&self) -> usize {
        self.frequency.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.frequency[i][j]
    }
}

/// Row indices for replicate resampling. With `block` of 1 rows are drawn
/// independently; otherwise contiguous blocks of that length are
/// concatenated (moving-block bootstrap) and truncated to `n`.
pub fn resample_rows(n: usize, block: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let block = block.clamp(1, n.max(1));
    let mut rows = Vec::with_capacity(n + block);
    while rows.len() < n {
        let start = rng.random_range(0..=n - block);
        rows.extend(start..start + block);
    }
    rows.truncate(n);
    rows
}

/// Run `id` on `b` resamples of `data`. Time-series algorithms use blocks
/// of length twice their maximum lag. Replicate `r` draws from the seed
/// stream `r` of `seed`, so results do not depend on scheduling.
pub fn bootstrap_edge_frequencies(
    data: &Dataset,
    id: AlgorithmId,
    params: &ParamMap,
    b: usize,
    seed: u64,
    mode: Parallelism,
    cancel: &CancelToken,
) -> Result<EdgeConfidence> {
    if b == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one replicate".into()));
    }
    let n = data.n_samples();
    let p = data.n_columns();
    let block = id.max_lag(params).map_or(1, |l| 2 * l.max(1));
    let votes: Vec<Result<DMatrix<f64>>> = map_range(b, mode, |r| {
        cancel.check()?;
        let mut rng = rng::child(seed, r as u64);
        let sample = data.select_rows(&resample_rows(n, block, &mut rng));
        run_algorithm(id, &sample, params, Parallelism::Sequential, cancel).map(|out| out.votes())
    });
    let mut sum = DMatrix::zeros(p, p);
    let mut ok = 0;
    for (r, v) in votes.into_iter().enumerate() {
        match v {
            Ok(m) => {
                sum += m;
                ok += 1;
            }
            Err(Error::Cancelled) => return Err(Error::Cancelled),
            Err(e) => log::warn!("bootstrap replicate {r} of {id} skipped: {e}"),
        }
    }
    if ok == 0 {
        return Err(Error::AllReplicatesFailed(b));
    }
    let freq = sum / ok as f64;
    Ok(EdgeConfidence::from_matrix(data.names(), &freq, ok, b - ok))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainEdge {
    pub from: String,
    pub to: String,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub graph: DiGraph,
    pub uncertain: Vec<UncertainEdge>,
    pub log: Vec<String>,
}

fn reaches(g: &DiGraph, from: usize, to: usize) -> bool {
    let mut seen = vec![false; g.n_nodes()];
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(g.children(v));
    }
    false
}

/// Drop edges with frequency at most `lo`, add absent edges with frequency
/// at least `hi`, then repair cycles: candidates are inserted by decreasing
/// frequency and an edge that would close a cycle is dropped, so every
/// dropped edge is the weakest on the cycle it closes. Surviving edges with
/// frequency strictly between the thresholds are listed for review.
pub fn refine_graph(graph: &DiGraph, conf: &EdgeConfidence, hi: f64, lo: f64) -> Result<Refinement> {
    refine(graph, conf, hi, lo, true)
}

/// [`refine_graph`] for time-series summary graphs, where feedback between
/// series is legitimate: thresholds apply but no cycle repair runs.
pub fn refine_summary_graph(graph: &DiGraph, conf: &EdgeConfidence, hi: f64, lo: f64) -> Result<Refinement> {
    refine(graph, conf, hi, lo, false)
}

fn refine(graph: &DiGraph, conf: &EdgeConfidence, hi: f64, lo: f64, acyclic: bool) -> Result<Refinement> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("need lo < hi, got lo={lo}, hi={hi}")));
    }
    let n = graph.n_nodes();
    if conf.n_nodes() != n {
        return Err(Error::DimensionMismatch { expected: n, got: conf.n_nodes() });
    }
    let labels = graph.labels().to_vec();
    let name = |i: usize| labels[i].as_str();
    let mut log = Vec::new();
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let f = conf.get(i, j);
            match (graph.has_edge(i, j), f > lo, f >= hi) {
                (true, true, _) => candidates.push((f, i, j)),
                (true, false, _) => log.push(format!("removed {} -> {} (frequency {f:.3} <= {lo})", name(i), name(j))),
                (false, _, true) => {
                    log.push(format!("added {} -> {} (frequency {f:.3} >= {hi})", name(i), name(j)));
                    candidates.push((f, i, j));
                }
                _ => {}
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut out = DiGraph::new(n).with_labels(labels.clone())?;
    for &(f, i, j) in &candidates {
        if acyclic && reaches(&out, j, i) {
            log.push(format!("dropped {} -> {} (frequency {f:.3}) to break a cycle", name(i), name(j)));
            log::info!("refine: dropped {} -> {} to break a cycle", name(i), name(j));
        } else {
            out.add_edge(i, j);
        }
    }
    let uncertain = out
        .edges()
        .into_iter()
        .filter(|&(i, j)| conf.get(i, j) > lo && conf.get(i, j) < hi)
        .map(|(i, j)| UncertainEdge { from: labels[i].clone(), to: labels[j].clone(), frequency: conf.get(i, j) })
        .collect();
    Ok(Refinement { graph: out, uncertain, log })
}

/// User knowledge, by node label. Serializes as
/// `{"required": [[from, to]], "forbidden": [[from, to]], "forbidden_as_effect": [node]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintSet {
    pub required: Vec<(String, String)>,
    pub forbidden: Vec<(String, String)>,
    pub forbidden_as_effect: Vec<String>,
}

impl ConstraintSet {
    pub fn is_empty(&self) -> bool {
        self.required.is_empty() && self.forbidden.is_empty() && self.forbidden_as_effect.is_empty()
    }

    /// Set union, keeping first-seen order.
    pub fn union(&self, other: &ConstraintSet) -> ConstraintSet {
        fn merge<T: Clone + PartialEq>(a: &[T], b: &[T]) -> Vec<T> {
            let mut v = a.to_vec();
            for x in b {
                if !v.contains(x) {
                    v.push(x.clone());
                }
            }
            v
        }
        ConstraintSet {
            required: merge(&self.required, &other.required),
            forbidden: merge(&self.forbidden, &other.forbidden),
            forbidden_as_effect: merge(&self.forbidden_as_effect, &other.forbidden_as_effect),
        }
    }

    /// Map labels to indices and check consistency.
    pub fn resolve(&self, labels: &[String]) -> Result<ResolvedConstraints> {
        let idx = |s: &str| {
            labels.iter().position(|l| l == s).ok_or_else(|| Error::InvalidParameter(format!("unknown node `{s}`")))
        };
        let pair = |(a, b): &(String, String)| -> Result<(usize, usize)> {
            let (i, j) = (idx(a)?, idx(b)?);
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop {a} -> {a}")));
            }
            Ok((i, j))
        };
        let required = self.required.iter().map(pair).collect::<Result<BTreeSet<_>>>()?;
        let forbidden = self.forbidden.iter().map(pair).collect::<Result<BTreeSet<_>>>()?;
        let no_parents = self.forbidden_as_effect.iter().map(|s| idx(s)).collect::<Result<BTreeSet<_>>>()?;
        for &(i, j) in &required {
            if forbidden.contains(&(i, j)) || no_parents.contains(&j) {
                return Err(Error::ConflictingConstraints(i, j));
            }
            if required.contains(&(j, i)) {
                return Err(Error::ConflictingConstraints(i, j));
            }
        }
        let n = labels.len();
        let req_graph = DiGraph::from_edges(n, &required.iter().copied().collect::<Vec<_>>());
        if !req_graph.is_acyclic() {
            return Err(Error::CycleFromConstraints);
        }
        Ok(ResolvedConstraints { required, forbidden, no_parents })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedConstraints {
    pub required: BTreeSet<(usize, usize)>,
    pub forbidden: BTreeSet<(usize, usize)>,
    pub no_parents: BTreeSet<usize>,
}

/// Remove forbidden edges and every parent of a `forbidden_as_effect` node,
/// insert required edges (replacing their reverses), then keep the other
/// edges in index order unless they would close a cycle.
pub fn apply_constraints(graph: &DiGraph, constraints: &ConstraintSet) -> Result<DiGraph> {
    constrain(graph, constraints, true)
}

/// [`apply_constraints`] for summary graphs: existing feedback loops are kept.
pub fn apply_constraints_summary(graph: &DiGraph, constraints: &ConstraintSet) -> Result<DiGraph> {
    constrain(graph, constraints, false)
}

fn constrain(graph: &DiGraph, constraints: &ConstraintSet, acyclic: bool) -> Result<DiGraph> {
    let labels = graph.labels().to_vec();
    let rc = constraints.resolve(&labels)?;
    let mut out = DiGraph::new(graph.n_nodes()).with_labels(labels)?;
    for &(i, j) in &rc.required {
        out.add_edge(i, j);
    }
    for (i, j) in graph.edges() {
        if rc.forbidden.contains(&(i, j)) || rc.no_parents.contains(&j) || rc.required.contains(&(j, i)) {
            continue;
        }
        if !acyclic || !reaches(&out, j, i) {
            out.add_edge(i, j);
        }
    }
    Ok(out)
}
