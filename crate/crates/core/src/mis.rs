//! Luby's maximal independent set with synchronous round counting.

use rand::Rng;

use crate::rng::{Domain, KeyedRng};
use crate::system::{ElementSet, SubCollection, WeightedSetSystem};

/// Undirected graph on a subset of elements; `u ~ v` iff they share a set of
/// the defining subcollection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxGraph {
    pub vertices: Vec<usize>,
    /// Adjacency by position in `vertices`, sorted, no self-loops.
    pub adjacency: Vec<Vec<usize>>,
}

impl AuxGraph {
    pub fn from_edges(vertices: Vec<usize>, edges: &[(usize, usize)]) -> Self {
        let pos = |v: usize| vertices.binary_search(&v).expect("edge endpoint is a vertex");
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for &(u, v) in edges {
            if u == v {
                continue;
            }
            let (a, b) = (pos(u), pos(v));
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        AuxGraph { vertices, adjacency }
    }

    /// Neighbor graph of `vertices` in subcollection `c`.
    pub fn neighbor_graph(sys: &WeightedSetSystem, c: &SubCollection, vertices: &ElementSet) -> Self {
        let verts = vertices.to_vec();
        let mut edges = Vec::new();
        for h in c.iter() {
            let inside: Vec<usize> = sys.set(h).iter().copied().filter(|&e| vertices.contains(e)).collect();
            for (i, &u) in inside.iter().enumerate() {
                for &v in &inside[i + 1..] {
                    edges.push((u, v));
                }
            }
        }
        AuxGraph::from_edges(verts, &edges)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let chosen = self.mask(set);
        (0..self.len()).all(|i| !chosen[i] || self.adjacency[i].iter().all(|&j| !chosen[j]))
    }

    pub fn is_maximal_independent(&self, set: &[usize]) -> bool {
        let chosen = self.mask(set);
        self.is_independent(set)
            && (0..self.len()).all(|i| chosen[i] || self.adjacency[i].iter().any(|&j| chosen[j]))
    }

    fn mask(&self, set: &[usize]) -> Vec<bool> {
        let mut chosen = vec![false; self.len()];
        for v in set {
            if let Ok(i) = self.vertices.binary_search(v) {
                chosen[i] = true;
            }
        }
        chosen
    }
}

/// Luby rounds: every live vertex draws a priority; local maxima join the set
/// and leave with their neighbors. `key` separates independent invocations.
/// Returns the chosen vertices (sorted) and the number of rounds.
pub fn luby_mis(graph: &AuxGraph, rng: &KeyedRng, key: (u64, u64)) -> (Vec<usize>, usize) {
    let n = graph.len();
    let mut live = vec![true; n];
    let mut remaining = n;
    let mut chosen = Vec::new();
    let mut rounds = 0u64;
    let mut priority = vec![0u64; n];
    while remaining > 0 {
        rounds += 1;
        for i in (0..n).filter(|&i| live[i]) {
            let v = graph.vertices[i] as u64;
            priority[i] = rng.stream(Domain::MisPriority, key.0, key.1, (rounds << 32) | v).gen();
        }
        let winners: Vec<usize> = (0..n)
            .filter(|&i| live[i])
            .filter(|&i| {
                graph.adjacency[i]
                    .iter()
                    .all(|&j| !live[j] || (priority[i], i) > (priority[j], j))
            })
            .collect();
        for &i in &winners {
            chosen.push(graph.vertices[i]);
            if live[i] {
                live[i] = false;
                remaining -= 1;
            }
            for &j in &graph.adjacency[i] {
                if live[j] {
                    live[j] = false;
                    remaining -= 1;
                }
            }
        }
    }
    chosen.sort_unstable();
    (chosen, rounds as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn edgeless_graph_takes_everything_in_one_round() {
        let g = AuxGraph::from_edges(vec![0, 3, 5, 9], &[]);
        let (mis, rounds) = luby_mis(&g, &KeyedRng::new(1), (0, 0));
        assert_eq!(mis, vec![0, 3, 5, 9]);
        assert_eq!(rounds, 1);
        let empty = AuxGraph::from_edges(vec![], &[]);
        assert_eq!(luby_mis(&empty, &KeyedRng::new(1), (0, 0)), (vec![], 0));
    }

    #[test]
    fn complete_graph_yields_one_vertex() {
        let edges: Vec<(usize, usize)> = (0..5).flat_map(|u| (u + 1..5).map(move |v| (u, v))).collect();
        let g = AuxGraph::from_edges((0..5).collect(), &edges);
        for seed in 0..20 {
            let (mis, _) = luby_mis(&g, &KeyedRng::new(seed), (0, 0));
            assert_eq!(mis.len(), 1);
        }
    }

    /// Independence and maximality checked by scanning every vertex pair.
    #[allow(clippy::needless_range_loop)]
    #[test]
    fn random_graphs_exhaustive_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..300u64 {
            let n = rng.gen_range(1..=12);
            let p = rng.gen_range(0.0..1.0);
            let mut edges = Vec::new();
            let mut adj = vec![vec![false; n]; n];
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(p) {
                        edges.push((u, v));
                        adj[u][v] = true;
                        adj[v][u] = true;
                    }
                }
            }
            let g = AuxGraph::from_edges((0..n).collect(), &edges);
            let (mis, rounds) = luby_mis(&g, &KeyedRng::new(trial), (trial, 1));
            assert!(rounds >= 1 && rounds <= n);
            for &u in &mis {
                for &v in &mis {
                    assert!(u == v || !adj[u][v]);
                }
            }
            for v in 0..n {
                assert!(mis.contains(&v) || mis.iter().any(|&u| adj[u][v]));
            }
            assert!(g.is_maximal_independent(&mis));
            assert_eq!(luby_mis(&g, &KeyedRng::new(trial), (trial, 1)).0, mis);
        }
    }

    #[test]
    fn neighbor_graph_edges() {
        let sys = WeightedSetSystem::new(4, vec![vec![0, 1], vec![1, 2, 3]], vec![1.0; 2]).unwrap();
        let g = AuxGraph::neighbor_graph(&sys, &SubCollection::from(vec![0]), &ElementSet::full(4));
        assert_eq!(g.adjacency, vec![vec![1], vec![0], vec![], vec![]]);
        let g = AuxGraph::neighbor_graph(&sys, &SubCollection::all(2), &ElementSet::from_elements(4, [0, 2, 3]));
        assert_eq!(g.vertices, vec![0, 2, 3]);
        assert_eq!(g.adjacency, vec![vec![], vec![2], vec![1]]);
    }
}
