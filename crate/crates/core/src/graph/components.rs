use std::collections::VecDeque;

use super::{FeatureMatrix, Graph, LabelSet, NodeId};
use crate::error::{Error, Result};

/// Dense ids kept by a component extraction; `kept[i]` is the old id of new node `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentMap {
    pub kept: Vec<NodeId>,
}

/// Restricts the graph to its largest weakly connected component and relabels
/// nodes contiguously (order preserved). Ties go to the component holding the
/// lowest node id.
pub fn largest_connected_component(
    g: &Graph,
    features: &FeatureMatrix,
    labels: &LabelSet,
) -> Result<(Graph, FeatureMatrix, LabelSet, ComponentMap)> {
    let n = g.n_nodes();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    features.check_rows(n)?;
    let mut comp = vec![usize::MAX; n];
    let mut best: Option<(usize, usize)> = None; // (size, id)
    let mut queue = VecDeque::new();
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut size = 0;
        comp[s] = next;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &u in g.neighbors(v) {
                let u = u as usize;
                if comp[u] == usize::MAX {
                    comp[u] = next;
                    queue.push_back(u);
                }
            }
        }
        // components are discovered in order of their lowest node id
        if best.is_none_or(|(bs, _)| size > bs) {
            best = Some((size, next));
        }
        next += 1;
    }
    let (_, id) = best.unwrap();
    let kept: Vec<NodeId> = (0..n).filter(|&v| comp[v] == id).collect();
    let sub = g.induced(&kept);
    let feats = features.select_rows(&kept);
    let labs = labels.select(&kept);
    Ok((sub, feats, labs, ComponentMap { kept }))
}

/// Nodes within `k` undirected hops of any seed, seeds included; sorted.
pub fn khop_neighborhood(g: &Graph, seeds: &[NodeId], k: usize) -> Vec<NodeId> {
    let mut dist = vec![usize::MAX; g.n_nodes()];
    let mut queue = VecDeque::new();
    for &s in seeds {
        if dist[s] == usize::MAX {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        if dist[v] == k {
            continue;
        }
        for &u in g.neighbors(v) {
            let u = u as usize;
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    (0..g.n_nodes()).filter(|&v| dist[v] != usize::MAX).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges.iter().copied(), false).unwrap().0
    }

    fn feats(n: usize) -> FeatureMatrix {
        FeatureMatrix::new(Array2::from_shape_fn((n, 2), |(i, j)| (i * 10 + j) as f64)).unwrap()
    }

    fn labels(n: usize) -> LabelSet {
        LabelSet::new((0..n).map(|v| Some(v as u32 % 2)).collect(), 2).unwrap()
    }

    #[test]
    fn two_triangles_tie_goes_to_lowest_id() {
        let g = graph(7, &[(3, 4), (4, 5), (5, 3), (0, 1), (1, 2), (2, 0)]);
        let (sub, f, l, map) = largest_connected_component(&g, &feats(7), &labels(7)).unwrap();
        assert_eq!(map.kept, vec![0, 1, 2]);
        assert_eq!(sub.n_nodes(), 3);
        assert_eq!(sub.n_edges(), 3);
        assert_eq!(f.row(2)[0], 20.0);
        assert_eq!(l.get(1), Some(1));
    }

    #[test]
    fn connected_graph_is_identity() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let (sub, f, _, map) = largest_connected_component(&g, &feats(4), &labels(4)).unwrap();
        assert_eq!(map.kept, vec![0, 1, 2, 3]);
        assert_eq!(sub, g);
        assert_eq!(f, feats(4));
    }

    #[test]
    fn six_and_four() {
        // component sizes by hand: {0,2,4,6,8,9} and {1,3,5,7}
        let g = graph(10, &[(0, 2), (2, 4), (4, 6), (6, 8), (8, 9), (1, 3), (3, 5), (5, 7)]);
        let (sub, ..) = largest_connected_component(&g, &feats(10), &labels(10)).unwrap();
        assert_eq!(sub.n_nodes(), 6);
        assert_eq!(sub.n_edges(), 5);
    }

    #[test]
    fn empty_graph_is_error() {
        let g = graph(0, &[]);
        let f = FeatureMatrix::new(Array2::zeros((0, 1))).unwrap();
        let l = LabelSet::new(vec![Some(0)], 1).unwrap();
        assert!(matches!(
            largest_connected_component(&g, &f, &l),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn khop_on_path() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(khop_neighborhood(&g, &[0], 0), vec![0]);
        assert_eq!(khop_neighborhood(&g, &[0], 2), vec![0, 1, 2]);
    }

    /// Truncated BFS oracle via repeated frontier expansion over the edge list.
    fn khop_oracle(g: &Graph, seeds: &[NodeId], k: usize) -> Vec<NodeId> {
        let mut reach = vec![false; g.n_nodes()];
        for &s in seeds {
            reach[s] = true;
        }
        for _ in 0..k {
            let prev = reach.clone();
            for &(a, b) in g.edges() {
                let (a, b) = (a as usize, b as usize);
                if prev[a] {
                    reach[b] = true;
                }
                if prev[b] {
                    reach[a] = true;
                }
            }
        }
        (0..g.n_nodes()).filter(|&v| reach[v]).collect()
    }

    fn random_graph(seed: u64, n: usize, p: f64) -> Graph {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut e = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(p) {
                    e.push((a, b));
                }
            }
        }
        graph(n, &e)
    }

    proptest! {
        #[test]
        fn khop_matches_oracle(seed in any::<u64>(), k in 0usize..5) {
            let g = random_graph(seed, 30, 0.08);
            let seeds = [0, 7, 19];
            prop_assert_eq!(khop_neighborhood(&g, &seeds, k), khop_oracle(&g, &seeds, k));
        }

        #[test]
        fn khop_monotone_and_saturates(seed in any::<u64>()) {
            let g = random_graph(seed, 25, 0.1);
            let mut prev = khop_neighborhood(&g, &[3], 0);
            for k in 1..=g.n_nodes() {
                let cur = khop_neighborhood(&g, &[3], k);
                prop_assert!(prev.iter().all(|v| cur.contains(v)));
                prev = cur;
            }
            prop_assert_eq!(khop_neighborhood(&g, &[3], g.n_nodes() + 1), prev);
        }
    }
}
