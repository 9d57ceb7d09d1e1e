use rand::seq::index;
use rand::Rng;

use super::{MotifInstance, MotifInstanceIndex};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Rejection attempts before a negative falls back to random non-neighbors.
pub const NEGATIVE_RETRIES: usize = 50;

/// Up to `q` distinct instances of motif `t` anchored at `v`, uniform
/// without replacement. Empty when `v` has none.
pub fn sample_instances<R: Rng + ?Sized>(
    idx: &MotifInstanceIndex,
    v: NodeId,
    t: usize,
    q: usize,
    rng: &mut R,
) -> Vec<MotifInstance> {
    let n = idx.count(v, t);
    if n <= q {
        return idx.instances(v, t).collect();
    }
    index::sample(rng, n, q)
        .into_iter()
        .map(|i| idx.instance(v, t, i))
        .collect()
}

/// A perturbed triple sharing the anchor of a positive instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NegativeSample {
    pub nodes: [NodeId; 3],
    /// Set when rejection sampling was exhausted.
    pub fallback: bool,
}

/// Keeps `v` and fills the two other slots with uniformly drawn nodes such
/// that `{v, u, w}` is not an observed instance of `t` at `v`. Only
/// membership in the positive set is checked, not the topology of the draw.
pub fn sample_negative_instance<R: Rng + ?Sized>(
    g: &Graph,
    idx: &MotifInstanceIndex,
    v: NodeId,
    t: usize,
    rng: &mut R,
) -> Result<NegativeSample> {
    let n = g.n_nodes();
    if idx.count(v, t) == 0 {
        return Err(Error::State(format!(
            "node {v} anchors no instance of motif {t}"
        )));
    }
    if n < 3 {
        return Err(Error::State("negative sampling needs at least 3 nodes".into()));
    }
    let draw_other = |rng: &mut R| loop {
        let u = rng.gen_range(0..n);
        if u != v {
            break u;
        }
    };
    for _ in 0..NEGATIVE_RETRIES {
        let a = draw_other(rng);
        let b = draw_other(rng);
        if a == b || idx.contains(v, t, a, b) {
            continue;
        }
        return Ok(NegativeSample {
            nodes: [v, a, b],
            fallback: false,
        });
    }
    let mut pool: Vec<NodeId> = (0..n).filter(|&u| u != v && !g.adjacent(v, u)).collect();
    if pool.len() < 2 {
        pool = (0..n).filter(|&u| u != v).collect();
    }
    let pick = index::sample(rng, pool.len(), 2);
    Ok(NegativeSample {
        nodes: [v, pool[pick.index(0)], pool[pick.index(1)]],
        fallback: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motif::{build_index, builtin_catalog, DirectedSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|l| (0, l)), false)
            .unwrap()
            .0
    }

    #[test]
    fn clamps_to_available() {
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)], false).unwrap().0;
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_instances(&idx, 0, 0, 20, &mut rng).len(), 3);
        assert!(sample_instances(&idx, 0, 1, 20, &mut rng).is_empty());
    }

    #[test]
    fn draws_distinct_instances() {
        // center of a 15-leaf star anchors C(15, 2) = 105 wedges
        let g = star(15);
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        assert_eq!(idx.count(0, 0), 105);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_instances(&idx, 0, 0, 20, &mut rng);
        assert_eq!(s.len(), 20);
        let set: std::collections::HashSet<_> = s.iter().map(|i| i.sorted_nodes()).collect();
        assert_eq!(set.len(), 20);
    }

    #[test]
    fn sampling_is_uniform() {
        // 10 instances, pick 3 per draw: each instance expected 0.3 * draws
        let g = star(5);
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        let n = idx.count(0, 0);
        assert_eq!(n, 10);
        let draws = 100_000;
        let mut hits = vec![0usize; n];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pos: Vec<_> = idx.instances(0, 0).map(|i| i.sorted_nodes()).collect();
        for _ in 0..draws {
            for inst in sample_instances(&idx, 0, 0, 3, &mut rng) {
                let k = pos.iter().position(|p| *p == inst.sorted_nodes()).unwrap();
                hits[k] += 1;
            }
        }
        let p = 0.3;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - mean).abs() < 3.0 * sigma, "{h} vs {mean}");
        }
    }

    #[test]
    fn negative_never_equals_positive() {
        // v=0's only triangle is (0,1,2); plenty of other nodes exist
        let mut e = vec![(0, 1), (1, 2), (2, 0)];
        e.extend((3..12).map(|x| (x - 1, x)));
        let g = Graph::from_edges(12, e, false).unwrap().0;
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let neg = sample_negative_instance(&g, &idx, 0, 1, &mut rng).unwrap();
            assert_eq!(neg.nodes[0], 0);
            assert!(!idx.contains(0, 1, neg.nodes[1], neg.nodes[2]));
            assert_ne!(neg.nodes[1], neg.nodes[2]);
        }
    }

    #[test]
    fn lone_triangle_falls_back() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (2, 0)], false).unwrap().0;
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let neg = sample_negative_instance(&g, &idx, 0, 1, &mut rng).unwrap();
        assert!(neg.fallback);
        assert_eq!(neg.nodes[0], 0);
    }

    #[test]
    fn no_positive_is_an_error() {
        let g = star(3);
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(sample_negative_instance(&g, &idx, 0, 1, &mut rng).is_err());
    }
}
