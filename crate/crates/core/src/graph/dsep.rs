use super::DiGraph;

/// d-separation of `x` and `y` given `z` in `g`, via the moralized ancestral
/// graph: `x` and `y` are d-separated iff removing `z` from the moral graph of
/// the ancestors of `{x, y} ∪ z` disconnects them.
pub fn d_separated(g: &DiGraph, x: usize, y: usize, z: &[usize]) -> bool {
    let n = g.n_nodes();
    let mut anc = vec![false; n];
    let mut stack: Vec<usize> = z.iter().copied().chain([x, y]).collect();
    while let Some(v) = stack.pop() {
        if anc[v] {
            continue;
        }
        anc[v] = true;
        stack.extend(g.parents(v));
    }
    let mut und = vec![vec![false; n]; n];
    for v in (0..n).filter(|&v| anc[v]) {
        let pa: Vec<usize> = g.parents(v).into_iter().filter(|&p| anc[p]).collect();
        for (k, &p) in pa.iter().enumerate() {
            und[p][v] = true;
            und[v][p] = true;
            for &q in &pa[k + 1..] {
                und[p][q] = true;
                und[q][p] = true;
            }
        }
    }
    let blocked: Vec<bool> = (0..n).map(|v| z.contains(&v)).collect();
    let mut seen = vec![false; n];
    let mut stack = vec![x];
    while let Some(v) = stack.pop() {
        if v == y {
            return false;
        }
        if seen[v] {
            continue;
        }
        seen[v] = true;
        for u in 0..n {
            if und[v][u] && !blocked[u] && !seen[u] {
                stack.push(u);
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_fork_collider() {
        let chain = DiGraph::from_edges(3, &[(0, 1), (1, 2)]);
        assert!(!d_separated(&chain, 0, 2, &[]));
        assert!(d_separated(&chain, 0, 2, &[1]));
        let fork = DiGraph::from_edges(3, &[(1, 0), (1, 2)]);
        assert!(d_separated(&fork, 0, 2, &[1]));
        let coll = DiGraph::from_edges(3, &[(0, 1), (2, 1)]);
        assert!(d_separated(&coll, 0, 2, &[]));
        assert!(!d_separated(&coll, 0, 2, &[1]));
        // conditioning on a descendant of the collider opens the path
        let coll_desc = DiGraph::from_edges(4, &[(0, 1), (2, 1), (1, 3)]);
        assert!(!d_separated(&coll_desc, 0, 2, &[3]));
    }
}
