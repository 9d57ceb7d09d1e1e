//! Exact enumeration of induced 3-node motif instances.
//!
//! Each connected triple is visited from its smallest undirected edge
//! `(u, w)`: the sorted neighbor lists of `u` and `w` are merged and every
//! third node `x` in their union closes a connected triple `{u, w, x}`.
//! The triple is kept only when `(u, w)` is its smallest edge, so wedges and
//! triangles are each emitted once. Cost is O(sum over edges of deg(u) + deg(w)).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::Catalog;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// One instance as seen from an anchor: `nodes[0]` is the anchor, the other
/// two follow in ascending id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MotifInstance {
    pub nodes: [NodeId; 3],
    pub motif: usize,
}

impl MotifInstance {
    pub fn sorted_nodes(&self) -> [NodeId; 3] {
        let mut n = self.nodes;
        n.sort_unstable();
        n
    }
}

/// Per-(node, motif) catalog of instances containing the node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotifInstanceIndex {
    n_nodes: usize,
    n_motifs: usize,
    /// Sorted node triples with their motif, ordered by (triple, motif).
    instances: Vec<([u32; 3], u16)>,
    /// Instance ids grouped by `v * n_motifs + t`.
    offsets: Vec<usize>,
    entries: Vec<u32>,
}

impl MotifInstanceIndex {
    fn from_instances(n_nodes: usize, n_motifs: usize, mut instances: Vec<([u32; 3], u16)>) -> Self {
        instances.sort_unstable();
        let slots = n_nodes * n_motifs;
        let mut counts = vec![0usize; slots + 1];
        for (nodes, t) in &instances {
            for &v in nodes {
                counts[v as usize * n_motifs + *t as usize + 1] += 1;
            }
        }
        for i in 0..slots {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut entries = vec![0u32; offsets[slots]];
        // instance ids ascend, so each group stays sorted by triple
        for (id, (nodes, t)) in instances.iter().enumerate() {
            for &v in nodes {
                let slot = v as usize * n_motifs + *t as usize;
                entries[fill[slot]] = id as u32;
                fill[slot] += 1;
            }
        }
        MotifInstanceIndex {
            n_nodes,
            n_motifs,
            instances,
            offsets,
            entries,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_motifs(&self) -> usize {
        self.n_motifs
    }

    /// Number of distinct instances over all motifs.
    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    fn group(&self, v: NodeId, t: usize) -> &[u32] {
        let slot = v * self.n_motifs + t;
        &self.entries[self.offsets[slot]..self.offsets[slot + 1]]
    }

    /// |I_v(M_t)|
    pub fn count(&self, v: NodeId, t: usize) -> usize {
        self.group(v, t).len()
    }

    /// Distinct instances of motif `t` in the whole graph.
    pub fn total(&self, t: usize) -> usize {
        self.instances.iter().filter(|(_, m)| *m as usize == t).count()
    }

    /// The `i`-th instance of motif `t` anchored at `v`.
    pub fn instance(&self, v: NodeId, t: usize, i: usize) -> MotifInstance {
        let (nodes, m) = self.instances[self.group(v, t)[i] as usize];
        let mut others = nodes.iter().map(|&x| x as NodeId).filter(|&x| x != v);
        let a = others.next().unwrap();
        let b = others.next().unwrap();
        MotifInstance {
            nodes: [v, a, b],
            motif: m as usize,
        }
    }

    pub fn instances(&self, v: NodeId, t: usize) -> impl Iterator<Item = MotifInstance> + '_ {
        (0..self.count(v, t)).map(move |i| self.instance(v, t, i))
    }

    /// Whether the node set `{v, a, b}` is an instance of `t` anchored at `v`.
    pub fn contains(&self, v: NodeId, t: usize, a: NodeId, b: NodeId) -> bool {
        let mut key = [v as u32, a as u32, b as u32];
        key.sort_unstable();
        self.group(v, t)
            .binary_search_by(|&id| self.instances[id as usize].0.cmp(&key))
            .is_ok()
    }

    /// All distinct instances as sorted triples with motif ids.
    pub fn all(&self) -> impl Iterator<Item = ([NodeId; 3], usize)> + '_ {
        self.instances.iter().map(|(n, t)| {
            (
                [n[0] as NodeId, n[1] as NodeId, n[2] as NodeId],
                *t as usize,
            )
        })
    }

    const MAGIC: &'static [u8; 4] = b"IMIX";
    const VERSION: u32 = 1;

    /// Writes the index tagged with the graph and catalog content hashes.
    pub fn save(&self, path: &Path, graph_hash: &str, catalog_hash: &str) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + self.instances.len() * 14);
        buf.extend_from_slice(Self::MAGIC);
        buf.extend_from_slice(&Self::VERSION.to_le_bytes());
        for h in [graph_hash, catalog_hash] {
            buf.extend_from_slice(&(h.len() as u32).to_le_bytes());
            buf.extend_from_slice(h.as_bytes());
        }
        buf.extend_from_slice(&(self.n_nodes as u64).to_le_bytes());
        buf.extend_from_slice(&(self.n_motifs as u32).to_le_bytes());
        buf.extend_from_slice(&(self.instances.len() as u64).to_le_bytes());
        for (n, t) in &self.instances {
            for x in n {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            buf.extend_from_slice(&t.to_le_bytes());
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    /// Reads a cached index; `Ok(None)` when the hashes do not match.
    pub fn load(path: &Path, graph_hash: &str, catalog_hash: &str) -> Result<Option<Self>> {
        let mut buf = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        let mut r = Cursor { buf: &buf, pos: 0 };
        if r.take(4)? != Self::MAGIC || r.u32()? != Self::VERSION {
            return Err(Error::Checkpoint(format!("{} is not an index cache", path.display())));
        }
        let gh = r.string()?;
        let ch = r.string()?;
        if gh != graph_hash || ch != catalog_hash {
            return Ok(None);
        }
        let n_nodes = r.u64()? as usize;
        let n_motifs = r.u32()? as usize;
        let n = r.u64()? as usize;
        let mut instances = Vec::with_capacity(n);
        for _ in 0..n {
            let nodes = [r.u32()?, r.u32()?, r.u32()?];
            let t = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
            instances.push((nodes, t));
        }
        Ok(Some(Self::from_instances(n_nodes, n_motifs, instances)))
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::Checkpoint("truncated index cache".into()));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("bad hash".into()))
    }
}

fn smallest_edge(g: &Graph, t: [usize; 3]) -> (usize, usize) {
    let mut best = (usize::MAX, usize::MAX);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (a, b) = (t[i].min(t[j]), t[i].max(t[j]));
        if g.adjacent(a, b) && (a, b) < best {
            best = (a, b);
        }
    }
    best
}

fn enumerate_edges(g: &Graph, catalog: &Catalog, edges: &[(usize, usize)]) -> Vec<([u32; 3], u16)> {
    let mut out = Vec::new();
    for &(u, w) in edges {
        let (nu, nw) = (g.neighbors(u), g.neighbors(w));
        let (mut i, mut j) = (0, 0);
        while i < nu.len() || j < nw.len() {
            let x = match (nu.get(i), nw.get(j)) {
                (Some(&a), Some(&b)) if a == b => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(&a), Some(&b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(_), Some(&b)) => {
                    j += 1;
                    b
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            } as usize;
            if x == u || x == w {
                continue;
            }
            let mut triple = [u, w, x];
            triple.sort_unstable();
            if smallest_edge(g, triple) != (u, w) {
                continue;
            }
            if let Some(t) = catalog.classify(g, triple) {
                out.push((
                    [triple[0] as u32, triple[1] as u32, triple[2] as u32],
                    t as u16,
                ));
            }
        }
    }
    out
}

fn undirected_edges(g: &Graph) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = (0..g.n_nodes())
        .flat_map(|u| {
            g.neighbors(u)
                .iter()
                .map(move |&w| (u, w as usize))
                .filter(|&(u, w)| u < w)
        })
        .collect();
    e.sort_unstable();
    e
}

/// Complete index of every induced instance of every catalog motif.
pub fn build_index(g: &Graph, catalog: &Catalog) -> Result<MotifInstanceIndex> {
    build_index_threaded(g, catalog, 1)
}

/// As [`build_index`], with the edge list split across `threads` workers.
/// The result does not depend on the thread count.
pub fn build_index_threaded(g: &Graph, catalog: &Catalog, threads: usize) -> Result<MotifInstanceIndex> {
    if catalog.is_empty() {
        return Err(Error::Config("motif catalog is empty".into()));
    }
    if catalog.len() > u16::MAX as usize {
        return Err(Error::Config("motif catalog too large".into()));
    }
    let edges = undirected_edges(g);
    let threads = threads.max(1);
    let instances = if threads == 1 || edges.is_empty() {
        enumerate_edges(g, catalog, &edges)
    } else {
        let chunk = edges.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = edges
                .chunks(chunk)
                .map(|part| s.spawn(move || enumerate_edges(g, catalog, part)))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("enumeration worker panicked"))
                .collect()
        })
    };
    Ok(MotifInstanceIndex::from_instances(g.n_nodes(), catalog.len(), instances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motif::{builtin_catalog, DirectedSet};

    fn undirected(n: usize, e: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, e.iter().copied(), false).unwrap().0
    }

    #[test]
    fn triangle_has_no_wedges() {
        let g = undirected(3, &[(0, 1), (1, 2), (2, 0)]);
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        for v in 0..3 {
            assert_eq!(idx.count(v, 0), 0);
            assert_eq!(idx.count(v, 1), 1);
        }
    }

    #[test]
    fn star_wedges() {
        let g = undirected(4, &[(0, 1), (0, 2), (0, 3)]);
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        assert_eq!(idx.count(0, 0), 3);
        for leaf in 1..4 {
            assert_eq!(idx.count(leaf, 0), 2);
        }
        assert_eq!(idx.total(0), 3);
    }

    #[test]
    fn k4_triangles() {
        let e: Vec<_> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
        let idx = build_index(&undirected(4, &e), &builtin_catalog(false, DirectedSet::Full)).unwrap();
        assert_eq!(idx.total(1), 4);
        assert!((0..4).all(|v| idx.count(v, 1) == 3));
    }

    #[test]
    fn anchored_view_puts_anchor_first() {
        let g = undirected(4, &[(0, 1), (0, 2), (0, 3)]);
        let idx = build_index(&g, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        for inst in idx.instances(2, 0) {
            assert_eq!(inst.nodes[0], 2);
            assert!(inst.nodes[1] < inst.nodes[2]);
            assert!(idx.contains(2, 0, inst.nodes[2], inst.nodes[1]));
        }
        assert!(!idx.contains(2, 0, 1, 1));
    }

    #[test]
    fn directed_chain_classified() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)], true).unwrap().0;
        let cat = builtin_catalog(true, DirectedSet::Acyclic5);
        let idx = build_index(&g, &cat).unwrap();
        let chain = cat.motifs().iter().position(|m| m.name == "chain").unwrap();
        assert_eq!(idx.total(chain), 1);
        assert_eq!(idx.n_instances(), 1);
    }

    #[test]
    fn cache_round_trip_and_key_mismatch() {
        let g = undirected(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]);
        let cat = builtin_catalog(false, DirectedSet::Full);
        let idx = build_index(&g, &cat).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        idx.save(f.path(), &g.content_hash(), &cat.content_hash()).unwrap();
        let back = MotifInstanceIndex::load(f.path(), &g.content_hash(), &cat.content_hash())
            .unwrap()
            .unwrap();
        assert_eq!(back, idx);
        assert!(MotifInstanceIndex::load(f.path(), "other", &cat.content_hash())
            .unwrap()
            .is_none());
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let mut e = Vec::new();
        for a in 0..80usize {
            for b in [a + 1, a + 3, a * 7 % 80] {
                if b < 80 && b != a {
                    e.push((a, b));
                }
            }
        }
        let g = undirected(80, &e);
        let cat = builtin_catalog(false, DirectedSet::Full);
        assert_eq!(
            build_index(&g, &cat).unwrap(),
            build_index_threaded(&g, &cat, 3).unwrap()
        );
    }
}
