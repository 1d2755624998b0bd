//! Markov-equivalence machinery: v-structures, Meek orientation rules,
//! DAG -> CPDAG completion and CPDAG -> DAG extension.

use super::{Cpdag, Dag, DiGraph};
use crate::error::{Error, Result};
use crate::rng;
use rand::seq::IndexedRandom;
use rand::Rng as _;
use std::collections::{BTreeSet, HashMap};

/// Unshielded colliders `a -> c <- b` (`a < b`, `a` and `b` nonadjacent)
/// among the directed edges of `g`, as `(a, c, b)`.
pub fn v_structures(g: &Cpdag) -> BTreeSet<(usize, usize, usize)> {
    let n = g.n_nodes();
    let mut out = BTreeSet::new();
    for c in 0..n {
        let pa = g.parents(c);
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !g.is_adjacent(a, b) {
                    out.insert((a, c, b));
                }
            }
        }
    }
    out
}

fn rule_orients(g: &Cpdag, a: usize, b: usize) -> bool {
    let n = g.n_nodes();
    // R1: c -> a - b, c and b nonadjacent
    for c in 0..n {
        if g.has_directed(c, a) && c != b && !g.is_adjacent(c, b) {
            return true;
        }
    }
    // R2: a -> c -> b
    for c in 0..n {
        if g.has_directed(a, c) && g.has_directed(c, b) {
            return true;
        }
    }
    // R3: a - c -> b, a - d -> b, c and d nonadjacent
    let pb: Vec<usize> = (0..n).filter(|&c| g.has_directed(c, b) && g.has_undirected(a, c)).collect();
    for (x, &c) in pb.iter().enumerate() {
        for &d in &pb[x + 1..] {
            if !g.is_adjacent(c, d) {
                return true;
            }
        }
    }
    // R4: d -> c -> b, a adjacent to c and d, d and b nonadjacent
    for c in 0..n {
        if c == a || !g.has_directed(c, b) || !g.is_adjacent(a, c) {
            continue;
        }
        for d in 0..n {
            if d != a && d != b && g.has_directed(d, c) && g.is_adjacent(a, d) && !g.is_adjacent(d, b) {
                return true;
            }
        }
    }
    false
}

/// Apply Meek rules R1-R4 to a fixed point. Only undirected edges are ever
/// oriented, so directed input edges are preserved.
pub fn meek_closure(g: &Cpdag) -> Cpdag {
    let mut g = g.clone();
    let n = g.n_nodes();
    loop {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if g.has_undirected(a, b) && rule_orients(&g, a, b) {
                    g.set_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

/// Completed partially directed graph of the equivalence class of `dag`:
/// v-structure edges directed, then closed under the Meek rules.
pub fn dag_to_cpdag(dag: &Dag) -> Cpdag {
    let n = dag.n_nodes();
    let mut c = Cpdag::new(n);
    c.labels = dag.labels().to_vec();
    for (i, j) in dag.edges() {
        let compelled = dag.parents(j).into_iter().any(|k| k != i && !dag.is_adjacent(k, i));
        if compelled {
            c.set_directed(i, j);
        } else {
            c.add_undirected(i, j);
        }
    }
    meek_closure(&c)
}

/// Whether `dag` is a consistent extension of `pdag`: same skeleton, every
/// directed edge kept, acyclic, and exactly the same v-structures.
pub fn is_consistent_extension(pdag: &Cpdag, dag: &DiGraph) -> bool {
    let n = pdag.n_nodes();
    if dag.n_nodes() != n || !dag.is_acyclic() {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            if pdag.has_directed(i, j) && !dag.has_edge(i, j) {
                return false;
            }
            if i < j && pdag.is_adjacent(i, j) != dag.is_adjacent(i, j) {
                return false;
            }
        }
    }
    v_structures(pdag) == v_structures(&Cpdag::from_digraph(dag))
}

/// Dor-Tarsi extension with seeded choice among eligible sinks.
fn dor_tarsi(pdag: &Cpdag, seed: u64) -> Option<DiGraph> {
    let n = pdag.n_nodes();
    let mut rng = rng::seeded(seed);
    let mut out = DiGraph::new(n);
    for (i, j) in pdag.directed_edges() {
        out.add_edge(i, j);
    }
    let mut alive = vec![true; n];
    let adjacent = |i: usize, j: usize| pdag.is_adjacent(i, j);
    for _ in 0..n {
        let mut eligible = Vec::new();
        for x in (0..n).filter(|&x| alive[x]) {
            if (0..n).any(|y| alive[y] && pdag.has_directed(x, y)) {
                continue;
            }
            let adj_x: Vec<usize> = (0..n).filter(|&y| alive[y] && y != x && adjacent(x, y)).collect();
            let ok = adj_x.iter().filter(|&&y| pdag.has_undirected(x, y)).all(|&y| {
                adj_x.iter().all(|&z| z == y || adjacent(y, z))
            });
            if ok {
                eligible.push(x);
            }
        }
        let &x = eligible.choose(&mut rng)?;
        for y in 0..n {
            if alive[y] && pdag.has_undirected(x, y) {
                out.add_edge(y, x);
            }
        }
        alive[x] = false;
    }
    Some(out)
}

/// True when `pdag` admits at least one consistent DAG extension.
pub fn consistent_extension_exists(pdag: &Cpdag) -> bool {
    dor_tarsi(pdag, 0).is_some_and(|d| is_consistent_extension(pdag, &d))
}

const MAX_COMPONENT: usize = 20;
const MAX_MEMO: usize = 50_000;

type EdgeSet = Vec<(usize, usize)>;

/// Uniform sampler over acyclic moral orientations of chordal undirected
/// components. Counts are computed by rooting: every orientation of a
/// connected chordal component has a unique source, and fixing the source
/// splits the rest into independent components after Meek propagation.
struct ExtensionCounter {
    memo: HashMap<EdgeSet, u128>,
    aborted: bool,
}

fn split_components(edges: &EdgeSet) -> Vec<EdgeSet> {
    let mut nodes: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let idx: HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, idx[&a]), find(&mut parent, idx[&b]));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, EdgeSet> = Default::default();
    for &(a, b) in edges {
        let r = find(&mut parent, idx[&a]);
        groups.entry(r).or_default().push((a, b));
    }
    groups.into_values().collect()
}

/// Orient every edge of the connected component `edges` out of `root`, run
/// Meek closure, and return (oriented edges, remaining undirected components).
fn root_component(edges: &EdgeSet, root: usize) -> (Vec<(usize, usize)>, Vec<EdgeSet>) {
    let mut nodes: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let idx: HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut local = Cpdag::new(nodes.len());
    for &(a, b) in edges {
        local.add_undirected(idx[&a], idx[&b]);
    }
    let r = idx[&root];
    for u in local.neighbors(r) {
        local.set_directed(r, u);
    }
    let closed = meek_closure(&local);
    let oriented = closed.directed_edges().into_iter().map(|(a, b)| (nodes[a], nodes[b])).collect();
    let rest: EdgeSet = closed.undirected_edges().into_iter().map(|(a, b)| (nodes[a], nodes[b])).collect();
    let comps = if rest.is_empty() { Vec::new() } else { split_components(&rest) };
    (oriented, comps)
}

fn component_nodes(edges: &EdgeSet) -> Vec<usize> {
    let mut nodes: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

impl ExtensionCounter {
    fn new() -> Self {
        ExtensionCounter { memo: HashMap::new(), aborted: false }
    }

    /// Number of orientations of a connected component.
    fn count(&mut self, edges: &EdgeSet) -> u128 {
        if self.aborted {
            return 0;
        }
        if let Some(&c) = self.memo.get(edges) {
            return c;
        }
        if self.memo.len() > MAX_MEMO {
            self.aborted = true;
            return 0;
        }
        let mut total: u128 = 0;
        for v in component_nodes(edges) {
            total = total.saturating_add(self.rooted_count(edges, v));
        }
        self.memo.insert(edges.clone(), total);
        total
    }

    fn rooted_count(&mut self, edges: &EdgeSet, root: usize) -> u128 {
        let (_, comps) = root_component(edges, root);
        comps.iter().fold(1u128, |acc, c| acc.saturating_mul(self.count(c)))
    }

    fn sample(&mut self, edges: &EdgeSet, rng: &mut rng::Rng, out: &mut Vec<(usize, usize)>) -> Option<()> {
        let nodes = component_nodes(edges);
        let weights: Vec<u128> = nodes.iter().map(|&v| self.rooted_count(edges, v)).collect();
        if self.aborted {
            return None;
        }
        let total: u128 = weights.iter().sum();
        if total == 0 {
            return None;
        }
        let mut pick = rng.random_range(0..total);
        let mut root = nodes[0];
        for (&v, &w) in nodes.iter().zip(&weights) {
            if pick < w {
                root = v;
                break;
            }
            pick -= w;
        }
        let (oriented, comps) = root_component(edges, root);
        out.extend(oriented);
        for c in &comps {
            self.sample(c, rng, out)?;
        }
        Some(())
    }
}

fn uniform_extension(pdag: &Cpdag, seed: u64) -> Option<DiGraph> {
    let und = pdag.undirected_edges();
    let comps = if und.is_empty() { Vec::new() } else { split_components(&und) };
    if comps.iter().any(|c| component_nodes(c).len() > MAX_COMPONENT) {
        return None;
    }
    let mut rng = rng::seeded(seed);
    let mut counter = ExtensionCounter::new();
    let mut oriented = Vec::new();
    for c in &comps {
        counter.sample(c, &mut rng, &mut oriented)?;
    }
    let mut g = DiGraph::new(pdag.n_nodes());
    for (i, j) in pdag.directed_edges().into_iter().chain(oriented) {
        g.add_edge(i, j);
    }
    Some(g)
}

/// A consistent extension of `cpdag`, drawn uniformly from its equivalence
/// class when the undirected components are small chordal graphs (always the
/// case for completed graphs of moderate size), otherwise by seeded
/// Dor-Tarsi elimination. Deterministic per seed.
pub fn cpdag_to_dag(cpdag: &Cpdag, seed: u64) -> Result<Dag> {
    let labels = cpdag.labels().to_vec();
    if let Some(g) = uniform_extension(cpdag, seed) {
        if is_consistent_extension(cpdag, &g) {
            return Dag::new(g.with_labels(labels)?);
        }
    }
    match dor_tarsi(cpdag, seed) {
        Some(g) if is_consistent_extension(cpdag, &g) => Dag::new(g.with_labels(labels)?),
        _ => Err(Error::NoConsistentExtension),
    }
}

/// DAG used for scoring a partially directed output against a ground-truth
/// DAG. Uses [`cpdag_to_dag`] when a consistent extension exists; otherwise
/// keeps the directed edges that do not close a cycle and orients the
/// undirected ones along a seeded topological order.
pub fn evaluation_dag(pdag: &Cpdag, seed: u64) -> Dag {
    if let Ok(d) = cpdag_to_dag(pdag, seed) {
        return d;
    }
    let n = pdag.n_nodes();
    let mut g = DiGraph::new(n);
    for (i, j) in pdag.directed_edges() {
        g.add_edge(i, j);
        if !g.is_acyclic() {
            g.remove_edge(i, j);
        }
    }
    let mut rng = rng::seeded(seed);
    let mut indeg: Vec<usize> = (0..n).map(|j| g.parents(j).len()).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&j| indeg[j] == 0).collect();
    let mut pos = vec![0usize; n];
    let mut k = 0;
    while !ready.is_empty() {
        let pick = rng.random_range(0..ready.len());
        let v = ready.swap_remove(pick);
        pos[v] = k;
        k += 1;
        for c in g.children(v) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.push(c);
            }
        }
    }
    for (i, j) in pdag.undirected_edges() {
        if pos[i] < pos[j] {
            g.add_edge(i, j);
        } else {
            g.add_edge(j, i);
        }
    }
    let g = g.with_labels(pdag.labels().to_vec()).expect("same node count");
    Dag::new(g).expect("edges follow a topological order")
}
