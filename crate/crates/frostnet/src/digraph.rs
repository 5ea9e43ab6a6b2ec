//! Directed graphs with mandatory self-loops, strong-connectivity
//! verification, and reproducible generators for experiment topologies.
//!
//! An edge `(j, i)` means agent `j` sends to agent `i`. Every node keeps a
//! self-loop; the in- and out-neighbor lists of node `i` both contain `i`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FrostError, Result};

/// A directed graph on nodes `0..n` with self-loops on every node.
///
/// Immutable after construction; safe to share read-only across concurrent
/// experiment runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    in_neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
}

impl Digraph {
    /// Builds a graph from ordered pairs `(j, i)` meaning `j -> i`.
    ///
    /// Self-loops are added if absent and duplicate edges are deduplicated.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        for &(j, i) in edges {
            if j >= n || i >= n {
                return Err(FrostError::EdgeOutOfRange(j, i, n));
            }
        }
        let mut set: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
        for v in 0..n {
            set.insert((v, v));
        }
        let mut in_neighbors = vec![Vec::new(); n];
        let mut out_neighbors = vec![Vec::new(); n];
        for &(j, i) in &set {
            in_neighbors[i].push(j);
            out_neighbors[j].push(i);
        }
        Ok(Digraph { n, edges: set, in_neighbors, out_neighbors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// All edges, self-loops included, as ordered pairs `(j, i)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, j: usize, i: usize) -> bool {
        self.edges.contains(&(j, i))
    }

    /// In-neighbors of `i`, including `i` itself.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Out-neighbors of `j`, including `j` itself.
    pub fn out_neighbors(&self, j: usize) -> &[usize] {
        &self.out_neighbors[j]
    }

    /// Number of edges excluding self-loops.
    pub fn edge_count(&self) -> usize {
        self.edges.len() - self.n
    }

    /// True iff every edge has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(j, i)| self.edges.contains(&(i, j)))
    }

    /// First asymmetric edge, if any.
    pub fn find_asymmetric_edge(&self) -> Option<(usize, usize)> {
        self.edges.iter().copied().find(|&(j, i)| !self.edges.contains(&(i, j)))
    }

    /// Serializes as plain text: first line `n`, then one `j i` pair per
    /// line. Self-loops are omitted (they are implied).
    pub fn to_edge_list_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.n);
        for &(j, i) in &self.edges {
            if j != i {
                let _ = writeln!(s, "{} {}", j, i);
            }
        }
        s
    }

    /// Parses the plain-text edge-list format written by
    /// [`Digraph::to_edge_list_text`].
    pub fn from_edge_list_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| FrostError::Parse("empty graph file".into()))?
            .trim()
            .parse()
            .map_err(|e| FrostError::Parse(format!("bad node count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let j: usize = it
                .next()
                .ok_or_else(|| FrostError::Parse(format!("bad edge line: {line:?}")))?
                .parse()
                .map_err(|e| FrostError::Parse(format!("bad edge line {line:?}: {e}")))?;
            let i: usize = it
                .next()
                .ok_or_else(|| FrostError::Parse(format!("bad edge line: {line:?}")))?
                .parse()
                .map_err(|e| FrostError::Parse(format!("bad edge line {line:?}: {e}")))?;
            edges.push((j, i));
        }
        Digraph::from_edge_list(n, &edges)
    }
}

/// True iff the graph has exactly one strongly connected component.
///
/// Iterative Tarjan, so deep graphs do not overflow the stack.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    tarjan_scc_count(g) == 1
}

fn tarjan_scc_count(g: &Digraph) -> usize {
    let n = g.n();
    if n == 0 {
        return 0;
    }
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0usize;
    let mut components = 0usize;

    // explicit DFS frame: (node, next out-neighbor position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let mut descended = false;
            while *pos < g.out_neighbors(v).len() {
                let w = g.out_neighbors(v)[*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                    descended = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if descended {
                continue;
            }
            if low[v] == index[v] {
                components += 1;
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    if w == v {
                        break;
                    }
                }
            }
            call.pop();
            if let Some(&mut (u, _)) = call.last_mut() {
                low[u] = low[u].min(low[v]);
            }
        }
    }
    components
}

/// Directed cycle `0 -> 1 -> ... -> n-1 -> 0` plus self-loops.
pub fn gen_ring(n: usize) -> Digraph {
    let edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    Digraph::from_edge_list(n, &edges).expect("ring edges are in range")
}

/// Seeded random strongly connected digraph.
///
/// The non-self-loop edge count is `round(edge_fraction * n * (n-1))`.
/// Strong connectivity is guaranteed by construction: a directed cycle over
/// a random permutation of the nodes, then uniformly sampled extra edges.
pub fn gen_random_strongly_connected(n: usize, edge_fraction: f64, seed: u64) -> Result<Digraph> {
    let total_pairs = n * n.saturating_sub(1);
    let target = (edge_fraction * total_pairs as f64).round() as usize;
    if n == 0 || (n > 1 && (target < n || edge_fraction <= 0.0 || edge_fraction > 1.0)) {
        return Err(FrostError::InfeasibleEdgeFraction { fraction: edge_fraction, n, min: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 1 {
        return Digraph::from_edge_list(1, &[]);
    }

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for w in perm.windows(2) {
        edges.insert((w[0], w[1]));
    }
    edges.insert((perm[n - 1], perm[0]));

    while edges.len() < target {
        let j = rng.random_range(0..n);
        let i = rng.random_range(0..n);
        if j != i {
            edges.insert((j, i));
        }
    }
    let list: Vec<(usize, usize)> = edges.into_iter().collect();
    Digraph::from_edge_list(n, &list)
}

/// Complete digraph on `n` nodes (self-loops included).
pub fn gen_complete(n: usize) -> Digraph {
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if j != i {
                edges.push((j, i));
            }
        }
    }
    Digraph::from_edge_list(n, &edges).expect("complete edges are in range")
}

/// Symmetrized copy: every edge gains its reverse.
pub fn symmetrize(g: &Digraph) -> Digraph {
    let mut edges = Vec::new();
    for (j, i) in g.edges() {
        edges.push((j, i));
        edges.push((i, j));
    }
    Digraph::from_edge_list(g.n(), &edges).expect("edges already in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reachability oracle: forward + reverse BFS from node 0.
    fn strongly_connected_bfs(g: &Digraph) -> bool {
        if g.n() == 0 {
            return false;
        }
        let forward = |v: usize| g.out_neighbors(v).to_vec();
        let backward = |v: usize| g.in_neighbors(v).to_vec();
        for next in [&forward as &dyn Fn(usize) -> Vec<usize>, &backward] {
            let mut seen = vec![false; g.n()];
            let mut queue = vec![0usize];
            seen[0] = true;
            while let Some(v) = queue.pop() {
                for w in next(v) {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push(w);
                    }
                }
            }
            if !seen.iter().all(|&s| s) {
                return false;
            }
        }
        true
    }

    #[test]
    fn single_node_has_self_loop_only() {
        let g = Digraph::from_edge_list(1, &[]).unwrap();
        assert_eq!(g.n(), 1);
        assert!(g.has_edge(0, 0));
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.in_neighbors(0), &[0]);
    }

    #[test]
    fn three_cycle_is_strongly_connected() {
        let g = Digraph::from_edge_list(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(g.edge_count(), 3);
        for v in 0..3 {
            assert!(g.has_edge(v, v));
        }
        assert!(is_strongly_connected(&g));
    }

    #[test]
    fn missing_return_path_is_not_strongly_connected() {
        let g = Digraph::from_edge_list(2, &[(0, 1)]).unwrap();
        assert!(!is_strongly_connected(&g));
        assert!(!strongly_connected_bfs(&g));
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let err = Digraph::from_edge_list(3, &[(0, 5)]).unwrap_err();
        assert!(matches!(err, FrostError::EdgeOutOfRange(0, 5, 3)));
    }

    #[test]
    fn duplicate_edges_deduplicated() {
        let g = Digraph::from_edge_list(3, &[(0, 1), (0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn ring_shapes() {
        let g = gen_ring(4);
        assert_eq!(g.edge_count(), 4);
        assert!(is_strongly_connected(&g));
        assert!(is_strongly_connected(&gen_ring(7)));
        let g1 = gen_ring(1);
        assert_eq!(g1.edge_count(), 0);
        assert!(is_strongly_connected(&g1));
    }

    #[test]
    fn random_generator_edge_counts_match_paper_fractions() {
        let g1 = gen_random_strongly_connected(50, 0.10, 7).unwrap();
        assert_eq!(g1.edge_count(), 245);
        let g3 = gen_random_strongly_connected(50, 0.16, 7).unwrap();
        assert_eq!(g3.edge_count(), 392);
    }

    #[test]
    fn random_generator_matches_reachability_oracle() {
        for seed in 0..10 {
            let g = gen_random_strongly_connected(23, 0.12, seed).unwrap();
            assert!(is_strongly_connected(&g));
            assert!(strongly_connected_bfs(&g));
        }
    }

    #[test]
    fn random_generator_is_deterministic() {
        let a = gen_random_strongly_connected(30, 0.2, 42).unwrap();
        let b = gen_random_strongly_connected(30, 0.2, 42).unwrap();
        assert_eq!(a, b);
        let c = gen_random_strongly_connected(30, 0.2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_fraction_gives_complete_digraph() {
        let g = gen_random_strongly_connected(3, 1.0, 0).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert_eq!(g, gen_complete(3));
    }

    #[test]
    fn infeasible_fraction_rejected() {
        assert!(gen_random_strongly_connected(10, 0.01, 0).is_err());
    }

    #[test]
    fn edge_list_text_round_trip() {
        let g = gen_random_strongly_connected(12, 0.3, 5).unwrap();
        let text = g.to_edge_list_text();
        let back = Digraph::from_edge_list_text(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn tarjan_agrees_with_bfs_oracle_on_mixed_graphs() {
        // strongly connected and not, hand-picked shapes
        let cases = vec![
            Digraph::from_edge_list(4, &[(0, 1), (1, 2), (2, 3)]).unwrap(),
            Digraph::from_edge_list(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap(),
            Digraph::from_edge_list(5, &[(0, 1), (1, 0), (2, 3), (3, 4), (4, 2), (1, 2)]).unwrap(),
            gen_complete(6),
        ];
        for g in cases {
            assert_eq!(is_strongly_connected(&g), strongly_connected_bfs(&g));
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn random_generator_invariants(
            n in 4usize..24,
            frac in 0.15f64..0.6,
            seed in 0u64..1000,
        ) {
            // feasibility: the edge budget must cover a Hamiltonian cycle
            let want = (frac * (n * (n - 1)) as f64).round() as usize;
            proptest::prop_assume!(want >= n);
            let g = gen_random_strongly_connected(n, frac, seed).unwrap();
            proptest::prop_assert!(is_strongly_connected(&g));
            proptest::prop_assert!(strongly_connected_bfs(&g));
            // self-loops everywhere, requested edge budget hit exactly
            for i in 0..n {
                proptest::prop_assert!(g.has_edge(i, i));
            }
            proptest::prop_assert_eq!(g.edge_count(), want);
            // seed determinism
            let again = gen_random_strongly_connected(n, frac, seed).unwrap();
            proptest::prop_assert_eq!(g, again);
        }
    }
}
