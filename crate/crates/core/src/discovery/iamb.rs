//! Markov-blanket discovery (interleaved IAMB) and assembly of per-node
//! blankets into a partially directed graph.

use super::pc::{orient, subsets, SepSets};
use crate::cancel::CancelToken;
use crate::ci::{build_test, CiTest, CiTestKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{BoolMatrix, Cpdag};
use crate::parallel::{map_range, Parallelism};

fn rest(mb: &[usize], drop: usize) -> Vec<usize> {
    mb.iter().copied().filter(|&v| v != drop).collect()
}

/// Interleaved grow/shrink Markov blanket of `target`. Returns a sorted set.
pub fn iamb(test: &dyn CiTest, target: usize, alpha: f64) -> Vec<usize> {
    let n = test.n_vars();
    let mut mb: Vec<usize> = Vec::new();
    // each variable can enter at most a bounded number of times
    for _ in 0..(4 * n + 4) {
        let mut best: Option<(f64, usize)> = None;
        for v in 0..n {
            if v == target || mb.contains(&v) {
                continue;
            }
            let p = test.test(target, v, &mb).p_value;
            if best.is_none_or(|b| p < b.0) {
                best = Some((p, v));
            }
        }
        match best {
            Some((p, v)) if p < alpha => mb.push(v),
            _ => break,
        }
        mb.sort_unstable();
        let mut k = 0;
        while k < mb.len() {
            let m = mb[k];
            if test.test(target, m, &rest(&mb, m)).p_value >= alpha {
                mb.remove(k);
            } else {
                k += 1;
            }
        }
    }
    mb
}

/// Combine blankets: keep `i - j` only when each lies in the other's blanket
/// and no subset of the smaller remaining blanket separates them, then orient
/// from the recorded separating sets.
pub fn mb_to_cpdag(blankets: &[Vec<usize>], test: &dyn CiTest, alpha: f64) -> Cpdag {
    let n = blankets.len();
    let mut adj = BoolMatrix::new(n);
    let mut sepsets = SepSets::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !(blankets[i].contains(&j) && blankets[j].contains(&i)) {
                // j outside MB(i) means MB(i) separates them
                let sep = if blankets[i].contains(&j) { rest(&blankets[j], i) } else { blankets[i].clone() };
                sepsets.insert((i, j), sep);
                continue;
            }
            let bi = rest(&blankets[i], j);
            let bj = rest(&blankets[j], i);
            let pool = if bj.len() < bi.len() { bj } else { bi };
            let found = (0..=pool.len()).flat_map(|k| subsets(&pool, k)).find(|s| test.test(i, j, s).p_value >= alpha);
            match found {
                Some(s) => {
                    sepsets.insert((i, j), s);
                }
                None => {
                    adj.set(i, j, true);
                    adj.set(j, i, true);
                }
            }
        }
    }
    orient(&adj, &sepsets)
}

pub fn iamb_cpdag(data: &Dataset, alpha: f64, test: CiTestKind) -> Result<Cpdag> {
    iamb_cpdag_cancellable(data, alpha, test, Parallelism::Sequential, &CancelToken::never())
}

pub fn iamb_cpdag_cancellable(data: &Dataset, alpha: f64, kind: CiTestKind, mode: Parallelism, cancel: &CancelToken) -> Result<Cpdag> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let test = build_test(data, kind)?;
    let blankets = map_range(data.n_columns(), mode, |t| {
        cancel.check().map(|_| iamb(test.as_ref(), t, alpha))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    cancel.check()?;
    mb_to_cpdag(&blankets, test.as_ref(), alpha).with_labels(data.names())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::DSeparationOracle;
    use crate::discovery::pc::{pc_with_test, PcConfig};
    use crate::graph::{erdos_renyi_dag, Dag};

    fn oracle(edges: &[(usize, usize)], n: usize) -> DSeparationOracle {
        DSeparationOracle::new(Dag::from_edges(n, edges).unwrap().into_graph())
    }

    #[test]
    fn chain_blanket() {
        let o = oracle(&[(0, 1), (1, 2)], 3);
        assert_eq!(iamb(&o, 1, 0.05), vec![0, 2]);
    }

    #[test]
    fn isolated_column_excluded() {
        let o = oracle(&[(0, 1), (1, 2)], 4);
        for t in 0..3 {
            assert!(!iamb(&o, t, 0.05).contains(&3));
        }
        assert!(iamb(&o, 3, 0.05).is_empty());
    }

    #[test]
    fn collider_spouse() {
        let o = oracle(&[(0, 2), (1, 2)], 3);
        assert_eq!(iamb(&o, 0, 0.05), vec![1, 2]);
    }

    #[test]
    fn and_rule_and_empty() {
        let o = oracle(&[], 3);
        let g = mb_to_cpdag(&[vec![1], vec![], vec![]], &o, 0.05);
        assert_eq!(g.n_edges(), 0);
        assert_eq!(mb_to_cpdag(&[vec![], vec![], vec![]], &o, 0.05).n_edges(), 0);
    }

    #[test]
    fn matches_oracle_pc() {
        for seed in 0..100u64 {
            let dag = erdos_renyi_dag(6, 0.35, seed);
            let o = DSeparationOracle::new(dag.graph().clone());
            let blankets: Vec<Vec<usize>> = (0..6).map(|t| iamb(&o, t, 0.05)).collect();
            let via_mb = mb_to_cpdag(&blankets, &o, 0.05);
            let via_pc = pc_with_test(&o, &PcConfig::default(), Parallelism::Sequential, &CancelToken::never()).unwrap().0;
            assert_eq!(via_mb, via_pc, "seed {seed}");
        }
    }
}
