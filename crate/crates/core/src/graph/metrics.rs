use super::DiGraph;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Edge-level agreement between a predicted and a true directed graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub shd: usize,
}

/// Ordered-pair precision/recall/F1 plus structural Hamming distance.
///
/// The diagonal is ignored. A reversed edge is one false positive and one
/// false negative, and costs 1 in SHD (per unordered pair whose status
/// differs). Two empty graphs score precision = recall = F1 = 1.
pub fn structural_metrics(predicted: &DiGraph, truth: &DiGraph) -> Result<EdgeMetrics> {
    let n = truth.n_nodes();
    if predicted.n_nodes() != n {
        return Err(Error::DimensionMismatch { expected: n, got: predicted.n_nodes() });
    }
    let (mut tp, mut fp, mut fn_, mut shd) = (0, 0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            match (predicted.has_edge(i, j), truth.has_edge(i, j)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
            if i < j {
                let p = (predicted.has_edge(i, j), predicted.has_edge(j, i));
                let t = (truth.has_edge(i, j), truth.has_edge(j, i));
                if p != t {
                    shd += 1;
                }
            }
        }
    }
    let (precision, recall) = match (tp + fp, tp + fn_) {
        (0, 0) => (1.0, 1.0),
        (0, _) => (0.0, 0.0),
        (_, 0) => (0.0, 0.0),
        (pp, tt) => (tp as f64 / pp as f64, tp as f64 / tt as f64),
    };
    let f1 = if tp + fp == 0 && tp + fn_ == 0 {
        1.0
    } else if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EdgeMetrics { tp, fp, fn_, precision, recall, f1, shd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical() {
        let g = DiGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let m = structural_metrics(&g, &g).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.shd), (1.0, 1.0, 1.0, 0));
    }

    #[test]
    fn missing_edge() {
        let truth = DiGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let pred = DiGraph::from_edges(3, &[(0, 1)]);
        let m = structural_metrics(&pred, &truth).unwrap();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.shd, 1);
    }

    #[test]
    fn reversal_costs_one() {
        let truth = DiGraph::from_edges(2, &[(0, 1)]);
        let pred = DiGraph::from_edges(2, &[(1, 0)]);
        let m = structural_metrics(&pred, &truth).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
        assert_eq!((m.precision, m.recall, m.f1, m.shd), (0.0, 0.0, 0.0, 1));
    }

    #[test]
    fn both_empty_is_perfect() {
        let g = DiGraph::new(4);
        let m = structural_metrics(&g, &g).unwrap();
        assert_eq!((m.f1, m.shd), (1.0, 0));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(structural_metrics(&DiGraph::new(2), &DiGraph::new(3)).is_err());
    }
}
