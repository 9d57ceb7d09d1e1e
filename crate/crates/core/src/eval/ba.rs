use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{self, Stream};

/// Preferential-attachment graph: a complete graph on `m + 1` seed nodes,
/// then each further node links to `m` distinct existing nodes drawn with
/// probability proportional to degree. Yields `C(m+1, 2) + m (n - m - 1)`
/// edges.
pub fn generate_ba_graph(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || n < m + 1 {
        return Err(Error::Config(format!("need m >= 1 and n >= m + 1 (n = {n}, m = {m})")));
    }
    let mut rng = rng::stream(seed, Stream::Data);
    let mut edges = Vec::with_capacity(m * (m + 1) / 2 + m * (n - m - 1));
    // every endpoint once per incident edge, so uniform draws are degree-biased
    let mut ends: Vec<usize> = Vec::with_capacity(2 * edges.capacity());
    for a in 0..=m {
        for b in a + 1..=m {
            edges.push((a, b));
            ends.extend([a, b]);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for v in m + 1..n {
        chosen.clear();
        while chosen.len() < m {
            let u = ends[rng.gen_range(0..ends.len())];
            if !chosen.contains(&u) {
                chosen.push(u);
            }
        }
        for &u in &chosen {
            edges.push((u, v));
            ends.extend([u, v]);
        }
    }
    Ok(Graph::from_edges(n, edges, false)?.0)
}
