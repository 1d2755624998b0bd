//! Stable PC: order-independent skeleton search followed by v-structure
//! orientation from separating sets and Meek closure.

use crate::cancel::CancelToken;
use crate::ci::{build_test, CiTest, CiTestKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{meek_closure, BoolMatrix, Cpdag};
use crate::parallel::{map_slice, Parallelism};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcConfig {
    pub alpha: f64,
    pub max_depth: Option<usize>,
    pub test: CiTestKind,
}

impl Default for PcConfig {
    fn default() -> Self {
        PcConfig { alpha: 0.05, max_depth: None, test: CiTestKind::FisherZ }
    }
}

impl PcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Separating sets keyed by `(i, j)` with `i < j`.
pub type SepSets = BTreeMap<(usize, usize), Vec<usize>>;

pub fn pc(data: &Dataset, cfg: &PcConfig) -> Result<Cpdag> {
    pc_cancellable(data, cfg, Parallelism::Sequential, &CancelToken::never())
}

pub fn pc_cancellable(data: &Dataset, cfg: &PcConfig, mode: Parallelism, cancel: &CancelToken) -> Result<Cpdag> {
    cfg.validate()?;
    if data.n_columns() < 2 {
        return Err(Error::InvalidParameter("pc needs at least two columns".into()));
    }
    let test = build_test(data, cfg.test)?;
    let (g, _) = pc_with_test(test.as_ref(), cfg, mode, cancel)?;
    g.with_labels(data.names())
}

/// Lexicographic `k`-subsets of `items` (already sorted).
pub(crate) fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for idx in start..items.len() {
            if items.len() - idx < k - cur.len() {
                break;
            }
            cur.push(items[idx]);
            rec(items, k, idx + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut cur, &mut out);
    out
}

fn find_sepset(test: &dyn CiTest, alpha: f64, i: usize, j: usize, nbrs_i: &[usize], nbrs_j: &[usize], level: usize) -> Option<Vec<usize>> {
    let mut tried: Vec<Vec<usize>> = Vec::new();
    for pool in [nbrs_i, nbrs_j] {
        if pool.len() < level {
            continue;
        }
        for s in subsets(pool, level) {
            if tried.contains(&s) {
                continue;
            }
            if test.test(i, j, &s).p_value >= alpha {
                return Some(s);
            }
            tried.push(s);
        }
    }
    None
}

/// Skeleton search plus orientation against an arbitrary CI test. Pairs at
/// one conditioning level are independent of each other and may run
/// concurrently; removals are applied after the level completes.
pub fn pc_with_test(test: &dyn CiTest, cfg: &PcConfig, mode: Parallelism, cancel: &CancelToken) -> Result<(Cpdag, SepSets)> {
    let n = test.n_vars();
    let mut adj = BoolMatrix::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                adj.set(i, j, true);
            }
        }
    }
    let mut sepsets = SepSets::new();
    let mut level = 0;
    loop {
        cancel.check()?;
        if cfg.max_depth.is_some_and(|d| level > d) {
            break;
        }
        let nbrs: Vec<Vec<usize>> = (0..n).map(|v| (0..n).filter(|&u| adj.get(v, u)).collect()).collect();
        let mut work = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if !adj.get(i, j) {
                    continue;
                }
                let ni: Vec<usize> = nbrs[i].iter().copied().filter(|&u| u != j).collect();
                let nj: Vec<usize> = nbrs[j].iter().copied().filter(|&u| u != i).collect();
                if ni.len() >= level || nj.len() >= level {
                    work.push((i, j, ni, nj));
                }
            }
        }
        if work.is_empty() {
            break;
        }
        let found = map_slice(&work, mode, |(i, j, ni, nj)| find_sepset(test, cfg.alpha, *i, *j, ni, nj, level));
        for ((i, j, _, _), s) in work.iter().zip(found) {
            if let Some(s) = s {
                adj.set(*i, *j, false);
                adj.set(*j, *i, false);
                sepsets.insert((*i, *j), s);
            }
        }
        level += 1;
    }
    Ok((orient(&adj, &sepsets), sepsets))
}

/// Orient unshielded colliders `i -> k <- j` whenever `k` is outside the
/// separating set of `(i, j)`, then close under the Meek rules. Collider
/// orientations that contradict an earlier one are skipped.
pub fn orient(adj: &BoolMatrix, sepsets: &SepSets) -> Cpdag {
    let n = adj.n();
    let mut g = Cpdag::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if adj.get(i, j) {
                g.add_undirected(i, j);
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if adj.get(i, j) {
                continue;
            }
            let Some(sep) = sepsets.get(&(i, j)) else { continue };
            for k in 0..n {
                if !(adj.get(i, k) && adj.get(j, k)) || sep.contains(&k) {
                    continue;
                }
                let ok = |a: usize| g.has_undirected(a, k) || g.has_directed(a, k);
                if ok(i) && ok(j) {
                    g.set_directed(i, k);
                    g.set_directed(j, k);
                }
            }
        }
    }
    meek_closure(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::DSeparationOracle;
    use crate::graph::{dag_to_cpdag, erdos_renyi_dag, Dag};

    fn oracle_pc(dag: &Dag) -> Cpdag {
        let o = DSeparationOracle::new(dag.graph().clone());
        pc_with_test(&o, &PcConfig::default(), Parallelism::Sequential, &CancelToken::never()).unwrap().0
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(subsets(&[1, 3, 5], 2), vec![vec![1, 3], vec![1, 5], vec![3, 5]]);
        assert_eq!(subsets(&[1, 3], 0), vec![Vec::<usize>::new()]);
        assert!(subsets(&[1], 2).is_empty());
    }

    #[test]
    fn oracle_collider() {
        for seed in 0..200u64 {
            // relabel the collider with a seed-dependent permutation
            let perm = [(0, 1, 2), (1, 2, 0), (2, 0, 1)][(seed % 3) as usize];
            let dag = Dag::from_edges(3, &[(perm.0, perm.2), (perm.1, perm.2)]).unwrap();
            let g = oracle_pc(&dag);
            assert!(g.has_directed(perm.0, perm.2) && g.has_directed(perm.1, perm.2));
            assert_eq!(g.n_edges(), 2);
        }
    }

    #[test]
    fn oracle_recovers_cpdag() {
        for seed in 0..200u64 {
            let n = 2 + (seed % 7) as usize;
            let dag = erdos_renyi_dag(n, 0.3, seed);
            assert_eq!(oracle_pc(&dag), dag_to_cpdag(&dag), "seed {seed}");
        }
    }

    #[test]
    fn parallel_levels_match_sequential() {
        let dag = erdos_renyi_dag(8, 0.4, 77);
        let o = DSeparationOracle::new(dag.graph().clone());
        let cfg = PcConfig::default();
        let a = pc_with_test(&o, &cfg, Parallelism::Sequential, &CancelToken::never()).unwrap();
        let b = pc_with_test(&o, &cfg, Parallelism::Parallel, &CancelToken::never()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn depth_zero_only_marginal_tests() {
        let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let o = DSeparationOracle::new(dag.graph().clone());
        let cfg = PcConfig { max_depth: Some(0), ..PcConfig::default() };
        let (g, _) = pc_with_test(&o, &cfg, Parallelism::Sequential, &CancelToken::never()).unwrap();
        // 0 and 2 are only separated given 1
        assert!(g.is_adjacent(0, 2));
    }

    #[test]
    fn rejects_bad_alpha_and_missing() {
        let d = Dataset::continuous(nalgebra::DMatrix::from_element(10, 2, f64::NAN));
        assert!(pc(&d, &PcConfig { alpha: 1.5, ..PcConfig::default() }).is_err());
        assert_eq!(pc(&d, &PcConfig::default()), Err(Error::DataContainsMissing));
    }
}
