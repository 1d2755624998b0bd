use super::{Dag, DiGraph};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng as _;

/// Random DAG: a seeded permutation fixes a causal order and every forward
/// pair receives an edge independently with probability `edge_prob`.
pub fn erdos_renyi_dag(n_nodes: usize, edge_prob: f64, seed: u64) -> Dag {
    assert!(n_nodes >= 1, "n_nodes must be at least 1");
    assert!((0.0..=1.0).contains(&edge_prob), "edge_prob must lie in [0, 1]");
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.shuffle(&mut rng);
    let mut g = DiGraph::new(n_nodes);
    for a in 0..n_nodes {
        for b in (a + 1)..n_nodes {
            if rng.random::<f64>() < edge_prob {
                g.add_edge(order[a], order[b]);
            }
        }
    }
    Dag::new(g).expect("edges follow a permutation order")
}
