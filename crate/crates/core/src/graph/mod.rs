//! Graph representations shared by every algorithm: weighted directed
//! graphs, DAGs, partially directed equivalence-class graphs and temporal
//! (lagged) graphs.

mod dsep;
mod equivalence;
pub mod io;
mod metrics;
mod random;

pub use dsep::d_separated;
pub use equivalence::{
    consistent_extension_exists, cpdag_to_dag, dag_to_cpdag, evaluation_dag, is_consistent_extension,
    meek_closure, v_structures,
};
pub use metrics::{structural_metrics, EdgeMetrics};
pub use io::{EdgeJson, GraphJson};
pub use random::erdos_renyi_dag;

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::ops::Deref;

/// Dense square boolean matrix, row-major. Row = cause, column = effect.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoolMatrix {
    n: usize,
    data: Vec<bool>,
}

impl BoolMatrix {
    pub fn new(n: usize) -> Self {
        BoolMatrix { n, data: vec![false; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.n + j] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.data.iter().enumerate().filter(|(_, &b)| b).map(move |(k, _)| (k / n, k % n))
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("X{i}")).collect()
}

/// Directed graph that may contain cycles (summary graphs, intermediate
/// edits). Optional weights are nonzero exactly where an edge exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiGraph {
    adj: BoolMatrix,
    weights: Option<DMatrix<f64>>,
    labels: Vec<String>,
}

impl DiGraph {
    pub fn new(n: usize) -> Self {
        DiGraph { adj: BoolMatrix::new(n), weights: None, labels: default_labels(n) }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = DiGraph::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    /// Edges wherever `w` is nonzero off the diagonal; the diagonal is dropped.
    pub fn from_weights(w: &DMatrix<f64>) -> Self {
        let n = w.nrows();
        let mut adj = BoolMatrix::new(n);
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && w[(i, j)] != 0.0 {
                    adj.set(i, j, true);
                    weights[(i, j)] = w[(i, j)];
                }
            }
        }
        DiGraph { adj, weights: Some(weights), labels: default_labels(n) }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch { expected: self.n_nodes(), got: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.n()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn adjacency(&self) -> &BoolMatrix {
        &self.adj
    }

    pub fn weights(&self) -> Option<&DMatrix<f64>> {
        self.weights.as_ref()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj.get(i, j)
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        if !self.adj.get(i, j) {
            return None;
        }
        Some(self.weights.as_ref().map_or(1.0, |w| w[(i, j)]))
    }

    /// Adds `i -> j`. Self-loops are ignored. Adding to a weighted graph
    /// drops the weights, since the new edge has no estimate.
    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i == j || self.adj.get(i, j) {
            return;
        }
        self.adj.set(i, j, true);
        self.weights = None;
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.adj.set(i, j, false);
        if let Some(w) = self.weights.as_mut() {
            w[(i, j)] = 0.0;
        }
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adj.pairs().collect()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.count()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.adj.get(i, j)).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&j| self.adj.get(i, j)).collect()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adj.get(i, j) || self.adj.get(j, i)
    }

    /// Kahn's algorithm; `None` when a cycle exists. Ties resolve to the
    /// smallest index so the order is deterministic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n_nodes();
        let mut indeg: Vec<usize> = (0..n).map(|j| self.parents(j).len()).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&j| indeg[j] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        (0..self.n_nodes()).all(|i| !self.adj.get(i, i)) && self.topological_order().is_some()
    }

    /// Some directed cycle as a node sequence `v0 -> v1 -> ... -> v0`, if any.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        let n = self.n_nodes();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        fn visit(g: &DiGraph, v: usize, state: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
            state[v] = 1;
            stack.push(v);
            for c in g.children(v) {
                if state[c] == 1 {
                    let pos = stack.iter().position(|&x| x == c).unwrap();
                    return Some(stack[pos..].to_vec());
                }
                if state[c] == 0 {
                    if let Some(cyc) = visit(g, c, state, stack) {
                        return Some(cyc);
                    }
                }
            }
            stack.pop();
            state[v] = 2;
            None
        }
        for v in 0..n {
            if state[v] == 0 {
                if let Some(c) = visit(self, v, &mut state, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Unweighted copy.
    pub fn structure(&self) -> DiGraph {
        DiGraph { adj: self.adj.clone(), weights: None, labels: self.labels.clone() }
    }
}

/// A directed acyclic graph. Always satisfies: zero diagonal, no directed
/// cycle, weights (when present) nonzero exactly on edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Dag(DiGraph);

impl Dag {
    pub fn empty(n: usize) -> Self {
        Dag(DiGraph::new(n))
    }

    pub fn new(g: DiGraph) -> Result<Self> {
        if !g.is_acyclic() {
            return Err(Error::Cyclic);
        }
        Ok(Dag(g))
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Dag::new(DiGraph::from_edges(n, edges))
    }

    pub fn from_weights(w: &DMatrix<f64>) -> Result<Self> {
        Dag::new(DiGraph::from_weights(w))
    }

    pub fn graph(&self) -> &DiGraph {
        &self.0
    }

    pub fn into_graph(self) -> DiGraph {
        self.0
    }

    pub fn with_labels(self, labels: Vec<String>) -> Result<Self> {
        Ok(Dag(self.0.with_labels(labels)?))
    }

    pub fn topological_order(&self) -> Vec<usize> {
        self.0.topological_order().expect("Dag invariant: acyclic")
    }

    /// Adds `i -> j` if the result stays acyclic.
    pub fn try_add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        let mut g = self.0.clone();
        g.add_edge(i, j);
        if !g.is_acyclic() {
            return Err(Error::Cyclic);
        }
        self.0 = g;
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.0.remove_edge(i, j);
    }
}

impl Deref for Dag {
    type Target = DiGraph;
    fn deref(&self) -> &DiGraph {
        &self.0
    }
}

impl<'de> Deserialize<'de> for Dag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let g = DiGraph::deserialize(d)?;
        Dag::new(g).map_err(serde::de::Error::custom)
    }
}

/// Partially directed graph: compelled edges in `directed`, reversible edges
/// in the symmetric `undirected` matrix. Completed equivalence-class graphs
/// from `dag_to_cpdag` satisfy every CPDAG property; graphs produced by
/// finite-sample search share the representation but may not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cpdag {
    directed: BoolMatrix,
    undirected: BoolMatrix,
    labels: Vec<String>,
}

impl Cpdag {
    pub fn new(n: usize) -> Self {
        Cpdag { directed: BoolMatrix::new(n), undirected: BoolMatrix::new(n), labels: default_labels(n) }
    }

    /// Builds from raw matrices, validating disjointness, symmetry and diagonals.
    pub fn from_parts(directed: BoolMatrix, undirected: BoolMatrix) -> Result<Self> {
        let n = directed.n();
        if undirected.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: undirected.n() });
        }
        for i in 0..n {
            if directed.get(i, i) || undirected.get(i, i) {
                return Err(Error::InvalidGraph("nonzero diagonal".into()));
            }
            for j in 0..n {
                if undirected.get(i, j) != undirected.get(j, i) {
                    return Err(Error::InvalidGraph("undirected matrix not symmetric".into()));
                }
                if undirected.get(i, j) && (directed.get(i, j) || directed.get(j, i)) {
                    return Err(Error::InvalidGraph(format!("pair ({i},{j}) both directed and undirected")));
                }
                if directed.get(i, j) && directed.get(j, i) {
                    return Err(Error::InvalidGraph(format!("pair ({i},{j}) directed both ways")));
                }
            }
        }
        Ok(Cpdag { directed, undirected, labels: default_labels(n) })
    }

    /// All edges of `g` as directed edges.
    pub fn from_digraph(g: &DiGraph) -> Self {
        let mut c = Cpdag::new(g.n_nodes());
        for (i, j) in g.edges() {
            c.directed.set(i, j, true);
        }
        c.labels = g.labels().to_vec();
        c
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch { expected: self.n_nodes(), got: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.directed.n()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn directed_matrix(&self) -> &BoolMatrix {
        &self.directed
    }

    pub fn undirected_matrix(&self) -> &BoolMatrix {
        &self.undirected
    }

    pub fn has_directed(&self, i: usize, j: usize) -> bool {
        self.directed.get(i, j)
    }

    pub fn has_undirected(&self, i: usize, j: usize) -> bool {
        self.undirected.get(i, j)
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.directed.get(i, j) || self.directed.get(j, i) || self.undirected.get(i, j)
    }

    pub fn add_undirected(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.directed.set(i, j, false);
        self.directed.set(j, i, false);
        self.undirected.set(i, j, true);
        self.undirected.set(j, i, true);
    }

    /// Sets the pair to exactly `i -> j`.
    pub fn set_directed(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.undirected.set(i, j, false);
        self.undirected.set(j, i, false);
        self.directed.set(j, i, false);
        self.directed.set(i, j, true);
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.directed.set(i, j, false);
        self.directed.set(j, i, false);
        self.undirected.set(i, j, false);
        self.undirected.set(j, i, false);
    }

    /// Undirected neighbours of `v`.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&u| self.undirected.get(v, u)).collect()
    }

    /// Nodes adjacent to `v` through any edge.
    pub fn adjacents(&self, v: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&u| self.is_adjacent(v, u)).collect()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&u| self.directed.get(u, v)).collect()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&u| self.directed.get(v, u)).collect()
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.directed.pairs().collect()
    }

    /// Undirected edges listed once as `(i, j)` with `i < j`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.undirected.pairs().filter(|&(i, j)| i < j).collect()
    }

    pub fn n_edges(&self) -> usize {
        self.directed.count() + self.undirected.count() / 2
    }

    /// Skeleton pairs `(i, j)` with `i < j`.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.is_adjacent(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_fully_directed(&self) -> bool {
        self.undirected.count() == 0
    }

    /// Directed graph counting every undirected edge in both directions.
    pub fn to_digraph_bidirected(&self) -> DiGraph {
        let mut g = DiGraph::new(self.n_nodes());
        for (i, j) in self.directed.pairs().chain(self.undirected.pairs()) {
            g.add_edge(i, j);
        }
        g.labels = self.labels.clone();
        g
    }
}

/// Instantaneous weights `intra` (acyclic, zero diagonal) and lagged weight
/// matrices `lagged[k-1]` for lags `k = 1..=max_lag`. Entry `[i][j]` is the
/// effect of variable `i` on variable `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalGraph {
    intra: DMatrix<f64>,
    lagged: Vec<DMatrix<f64>>,
    labels: Vec<String>,
}

impl TemporalGraph {
    pub fn new(intra: DMatrix<f64>, lagged: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = intra.nrows();
        if intra.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: intra.ncols() });
        }
        for a in &lagged {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.nrows() });
            }
        }
        if (0..n).any(|i| intra[(i, i)] != 0.0) {
            return Err(Error::InvalidGraph("instantaneous matrix has nonzero diagonal".into()));
        }
        if !DiGraph::from_weights(&intra).is_acyclic() {
            return Err(Error::Cyclic);
        }
        Ok(TemporalGraph { intra, lagged, labels: default_labels(n) })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch { expected: self.n_nodes(), got: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.intra.nrows()
    }

    pub fn max_lag(&self) -> usize {
        self.lagged.len()
    }

    pub fn intra(&self) -> &DMatrix<f64> {
        &self.intra
    }

    pub fn lagged(&self) -> &[DMatrix<f64>] {
        &self.lagged
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Replace lagged matrices, keeping the instantaneous part.
    pub fn with_lagged(&self, lagged: Vec<DMatrix<f64>>) -> Result<Self> {
        let mut out = TemporalGraph::new(self.intra.clone(), lagged)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Edge `i -> j` iff any instantaneous or lagged coefficient is nonzero;
    /// self-effects are dropped. Cycles are allowed.
    pub fn summary_graph(&self) -> DiGraph {
        let n = self.n_nodes();
        let mut g = DiGraph::new(n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if self.intra[(i, j)] != 0.0 || self.lagged.iter().any(|a| a[(i, j)] != 0.0) {
                    g.add_edge(i, j);
                }
            }
        }
        g.labels = self.labels.clone();
        g
    }
}

/// Free-function form of [`TemporalGraph::summary_graph`].
pub fn summary_graph(tg: &TemporalGraph) -> DiGraph {
    tg.summary_graph()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dag_rejects_cycle() {
        assert_eq!(Dag::from_edges(3, &[(0, 1), (1, 2), (2, 0)]), Err(Error::Cyclic));
        assert!(Dag::from_edges(3, &[(0, 1), (1, 2)]).is_ok());
    }

    #[test]
    fn find_cycle_reports_members() {
        let g = DiGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 1)]);
        let mut c = g.find_cycle().unwrap();
        c.sort();
        assert_eq!(c, vec![1, 2, 3]);
        assert!(DiGraph::from_edges(3, &[(0, 1)]).find_cycle().is_none());
    }

    #[test]
    fn weights_follow_edges() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 0.7;
        w[(1, 1)] = 5.0;
        let d = Dag::from_weights(&w).unwrap();
        assert_eq!(d.edges(), vec![(0, 1)]);
        assert_eq!(d.weight(0, 1), Some(0.7));
        assert_eq!(d.weight(1, 1), None);
    }

    #[test]
    fn default_labels_are_x_indexed() {
        assert_eq!(Dag::empty(3).labels(), &["X0", "X1", "X2"]);
    }

    #[test]
    fn cpdag_parts_validation() {
        let mut d = BoolMatrix::new(2);
        let mut u = BoolMatrix::new(2);
        d.set(0, 1, true);
        u.set(0, 1, true);
        u.set(1, 0, true);
        assert!(Cpdag::from_parts(d, u).is_err());
        let mut u = BoolMatrix::new(2);
        u.set(0, 1, true);
        assert!(Cpdag::from_parts(BoolMatrix::new(2), u).is_err());
    }

    #[test]
    fn summary_graph_cases() {
        let z = DMatrix::zeros(2, 2);
        let tg = TemporalGraph::new(z.clone(), vec![z.clone(), z.clone(), z.clone()]).unwrap();
        assert_eq!(tg.summary_graph().n_edges(), 0);

        let mut a2 = z.clone();
        a2[(0, 1)] = 0.3;
        let tg = TemporalGraph::new(z.clone(), vec![z.clone(), a2, z.clone()]).unwrap();
        assert_eq!(tg.summary_graph().edges(), vec![(0, 1)]);

        let mut a1 = z.clone();
        a1[(0, 1)] = 0.3;
        a1[(0, 0)] = 0.9; // autoregressive, dropped
        let mut a3 = z.clone();
        a3[(1, 0)] = -0.2;
        let tg = TemporalGraph::new(z.clone(), vec![a1, z.clone(), a3]).unwrap();
        let s = tg.summary_graph();
        assert_eq!(s.edges(), vec![(0, 1), (1, 0)]);
        assert!(!s.is_acyclic());
    }

    #[test]
    fn temporal_rejects_cyclic_intra() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        assert_eq!(TemporalGraph::new(w, vec![]), Err(Error::Cyclic));
    }
}
