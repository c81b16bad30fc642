//! Topological interaction graph over robots and its maximal cliques.
//!
//! Every robot links to its `k` nearest neighbours (optionally capped by a
//! communication radius); the relation is symmetrized by union. The maximal
//! cliques of the result are the factors of the swarm energy.

use nalgebra::Point2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("neighbourhood size k = {k} outside 1..={max} for {n} robots")]
    KOutOfRange { k: usize, n: usize, max: usize },
    #[error("robots {0} and {1} share a position")]
    DuplicatePosition(usize, usize),
    #[error("robot id {id} out of range for {n} robots")]
    InvalidId { id: usize, n: usize },
    #[error("adjacency must be square, symmetric and irreflexive")]
    BadAdjacency,
}

/// Undirected robot graph plus its maximal-clique factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionGraph {
    k: usize,
    r_comm: Option<f64>,
    adj: Vec<Vec<bool>>,
    cliques: Vec<Vec<usize>>,
}

impl InteractionGraph {
    /// Wraps an explicit adjacency matrix (tests, debugging).
    pub fn from_adjacency(adj: Vec<Vec<bool>>) -> Result<Self, GraphError> {
        let n = adj.len();
        for (i, row) in adj.iter().enumerate() {
            if row.len() != n || row[i] {
                return Err(GraphError::BadAdjacency);
            }
            if (0..n).any(|j| row[j] != adj[j][i]) {
                return Err(GraphError::BadAdjacency);
            }
        }
        let cliques = maximal_cliques(&adj);
        Ok(InteractionGraph {
            k: 0,
            r_comm: None,
            adj,
            cliques,
        })
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r_comm(&self) -> Option<f64> {
        self.r_comm
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adj
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adj[i][j])
            .collect()
    }

    /// Indices of cliques containing robot `i`.
    pub fn cliques_of(&self, i: usize) -> Vec<usize> {
        self.cliques
            .iter()
            .enumerate()
            .filter(|(_, c)| c.binary_search(&i).is_ok())
            .map(|(ci, _)| ci)
            .collect()
    }

    /// One line per clique, ids separated by spaces.
    pub fn cliques_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cliques {
            let ids: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            out.push_str(&ids.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Builds the k-nearest-neighbour graph, ties going to the lower id.
pub fn build_interaction_graph(
    positions: &[Point2<f64>],
    k: usize,
    r_comm: Option<f64>,
) -> Result<InteractionGraph, GraphError> {
    let n = positions.len();
    if k == 0 || k + 1 > n {
        return Err(GraphError::KOutOfRange {
            k,
            n,
            max: n.saturating_sub(1),
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            if positions[i] == positions[j] {
                return Err(GraphError::DuplicatePosition(i, j));
            }
        }
    }
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (nalgebra::distance(&positions[i], &positions[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, j) in others.iter().take(k) {
            if r_comm.is_some_and(|r| d > r) {
                break;
            }
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    let cliques = maximal_cliques(&adj);
    Ok(InteractionGraph { k, r_comm, adj, cliques })
}

/// Neighbours of robot `i`.
pub fn markov_blanket(g: &InteractionGraph, i: usize) -> Result<Vec<usize>, GraphError> {
    if i >= g.len() {
        return Err(GraphError::InvalidId { id: i, n: g.len() });
    }
    Ok((0..g.len()).filter(|&j| g.adj[i][j]).collect())
}

/// True iff no robot is isolated. Vacuously true for an empty swarm.
pub fn check_connectivity_condition(g: &InteractionGraph) -> bool {
    g.adj.iter().all(|row| row.iter().any(|&a| a))
}

/// Bron-Kerbosch with Tomita pivoting. Each clique is sorted ascending and the
/// list is sorted lexicographically.
pub fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut out = Vec::new();
    let mut r = Vec::new();
    bron_kerbosch(adj, &mut r, (0..n).collect(), Vec::new(), &mut out);
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort();
    out
}

fn bron_kerbosch(
    adj: &[Vec<bool>],
    r: &mut Vec<usize>,
    mut p: Vec<usize>,
    mut x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    let pivot = p
        .iter()
        .chain(&x)
        .copied()
        .max_by_key(|&u| (p.iter().filter(|&&v| adj[u][v]).count(), std::cmp::Reverse(u)))
        .expect("P is non-empty");
    let branch: Vec<usize> = p.iter().copied().filter(|&v| !adj[pivot][v]).collect();
    for v in branch {
        let np = p.iter().copied().filter(|&w| adj[v][w]).collect();
        let nx = x.iter().copied().filter(|&w| adj[v][w]).collect();
        r.push(v);
        bron_kerbosch(adj, r, np, nx, out);
        r.pop();
        p.retain(|&w| w != v);
        x.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(xy: &[(f64, f64)]) -> Vec<Point2<f64>> {
        xy.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    fn from_edges(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; n]; n];
        for &(i, j) in edges {
            adj[i][j] = true;
            adj[j][i] = true;
        }
        adj
    }

    #[test]
    fn two_robots() {
        let g = build_interaction_graph(&pts(&[(0.0, 0.0), (3.0, 0.0)]), 1, None).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(g.cliques(), &[vec![0, 1]]);
    }

    #[test]
    fn collinear_knn() {
        let g = build_interaction_graph(&pts(&[(0.0, 0.0), (1.0, 0.0), (10.0, 0.0)]), 1, None).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(g.cliques(), &[vec![0, 1], vec![1, 2]]);
    }

    #[test]
    fn k_equal_n_minus_one_is_complete() {
        let p = pts(&[(0.0, 0.0), (1.0, 5.0), (7.0, 2.0), (3.0, 3.0), (9.0, 9.0)]);
        let g = build_interaction_graph(&p, 4, None).unwrap();
        assert_eq!(g.cliques(), &[vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn ties_prefer_lower_id() {
        // robot 0 is equidistant from 1 and 2; 2 and 3 pick each other
        let g = build_interaction_graph(&pts(&[(0.0, 0.0), (2.0, 0.0), (-2.0, 0.0), (-3.0, 0.0)]), 1, None).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn input_errors() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(build_interaction_graph(&p, 2, None), Err(GraphError::KOutOfRange { .. })));
        assert!(matches!(build_interaction_graph(&p, 0, None), Err(GraphError::KOutOfRange { .. })));
        let dup = pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        assert_eq!(build_interaction_graph(&dup, 1, None), Err(GraphError::DuplicatePosition(0, 2)));
    }

    #[test]
    fn blankets() {
        let path = InteractionGraph::from_adjacency(from_edges(3, &[(0, 1), (1, 2)])).unwrap();
        assert_eq!(markov_blanket(&path, 1).unwrap(), vec![0, 2]);
        let k5: Vec<(usize, usize)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        let full = InteractionGraph::from_adjacency(from_edges(5, &k5)).unwrap();
        assert_eq!(markov_blanket(&full, 0).unwrap(), vec![1, 2, 3, 4]);
        assert!(markov_blanket(&full, 5).is_err());
    }

    #[test]
    fn connectivity() {
        let g = build_interaction_graph(&pts(&[(0.0, 0.0), (50.0, 0.0), (3.0, 0.0)]), 1, None).unwrap();
        assert!(check_connectivity_condition(&g));
        let far = build_interaction_graph(&pts(&[(0.0, 0.0), (50.0, 0.0)]), 1, Some(10.0)).unwrap();
        assert!(!check_connectivity_condition(&far));
        assert!(check_connectivity_condition(&InteractionGraph::from_adjacency(vec![]).unwrap()));
    }

    #[test]
    fn small_clique_cases() {
        assert_eq!(maximal_cliques(&from_edges(3, &[(0, 1), (1, 2), (0, 2)])), vec![vec![0, 1, 2]]);
        assert_eq!(maximal_cliques(&from_edges(3, &[(0, 1), (1, 2)])), vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(maximal_cliques(&from_edges(3, &[(0, 1)])), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn rejects_bad_adjacency() {
        assert!(InteractionGraph::from_adjacency(vec![vec![true]]).is_err());
        assert!(InteractionGraph::from_adjacency(vec![vec![false, true], vec![false, false]]).is_err());
    }

    proptest! {
        #[test]
        fn knn_graph_invariants(coords in proptest::collection::btree_set((0i32..30, 0i32..30), 2..14), k in 1usize..6) {
            let p: Vec<Point2<f64>> = coords.iter().map(|&(x, y)| Point2::new(x as f64, y as f64)).collect();
            let k = k.min(p.len() - 1);
            let g = build_interaction_graph(&p, k, None).unwrap();
            prop_assert!(check_connectivity_condition(&g));
            for i in 0..g.len() {
                prop_assert!(!g.adjacent(i, i));
                for j in 0..g.len() {
                    prop_assert_eq!(g.adjacent(i, j), g.adjacent(j, i));
                }
            }
            for (i, j) in g.edges() {
                prop_assert!(g.cliques().iter().any(|c| c.contains(&i) && c.contains(&j)));
            }
            for c in g.cliques() {
                for v in 0..g.len() {
                    if !c.contains(&v) {
                        prop_assert!(c.iter().any(|&u| !g.adjacent(u, v)));
                    }
                }
            }
            let again = build_interaction_graph(&p, k, None).unwrap();
            prop_assert_eq!(again.cliques(), g.cliques());
        }
    }
}
