#![allow(dead_code)]

pub mod criteria;

use std::collections::BTreeMap;

use infomotif::graph::Graph;
use infomotif::motif::Catalog;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

pub fn erdos_renyi(n: usize, p: f64, directed: bool, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b || (!directed && b < a) {
                continue;
            }
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    Graph::from_edges(n, edges, directed).unwrap().0
}

/// Motif id of the induced subgraph on `nodes`, found by trying every slot
/// assignment against each motif's edge pattern.
pub fn brute_classify(g: &Graph, catalog: &Catalog, nodes: [usize; 3]) -> Option<usize> {
    let directed = g.is_directed();
    catalog.motifs().iter().position(|m| {
        let pattern = m.edge_pattern();
        PERMS.iter().any(|p| {
            (0..3).all(|i| {
                (0..3).all(|j| {
                    if i == j || (!directed && j < i) {
                        return true;
                    }
                    let (u, v) = (nodes[p[i]], nodes[p[j]]);
                    let present = if directed { g.has_edge(u, v) } else { g.adjacent(u, v) };
                    present == pattern.contains(&(i, j))
                })
            })
        })
    })
}

/// Every node triple with its motif id, by exhaustive enumeration.
pub fn brute_instances(g: &Graph, catalog: &Catalog) -> BTreeMap<[usize; 3], usize> {
    let n = g.n_nodes();
    let mut out = BTreeMap::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if let Some(t) = brute_classify(g, catalog, [a, b, c]) {
                    out.insert([a, b, c], t);
                }
            }
        }
    }
    out
}

pub fn complete(n: usize) -> Graph {
    let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
    Graph::from_edges(n, edges, false).unwrap().0
}

pub fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
