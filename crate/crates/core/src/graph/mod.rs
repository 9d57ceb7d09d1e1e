//! Immutable attributed graphs, labels and data splits.

mod components;
pub mod io;
pub mod schema;
mod split;

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use components::{khop_neighborhood, largest_connected_component, ComponentMap};
pub use io::{load_features, load_graph, load_labels, load_node_types, LoadReport};
pub use schema::Schema;
pub use split::{make_splits, LabelSet, Split};

pub type NodeId = usize;
pub type TypeId = u16;

/// Sorted adjacency lists in compressed form.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    /// Index into `Graph::edges` for each entry of `targets`.
    edge_ids: Vec<u32>,
}

impl Adjacency {
    fn build(n: usize, pairs: impl Iterator<Item = (usize, usize, usize)>) -> Self {
        let mut buckets: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for (src, dst, eid) in pairs {
            buckets[src].push((dst as u32, eid as u32));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut edge_ids = Vec::new();
        offsets.push(0);
        for mut b in buckets {
            b.sort_unstable();
            b.dedup_by_key(|x| x.0);
            for (t, e) in b {
                targets.push(t);
                edge_ids.push(e);
            }
            offsets.push(targets.len());
        }
        Adjacency {
            offsets,
            targets,
            edge_ids,
        }
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    fn position(&self, u: NodeId, v: NodeId) -> Option<usize> {
        let start = self.offsets[u];
        self.neighbors(u)
            .binary_search(&(v as u32))
            .ok()
            .map(|i| start + i)
    }

    #[inline]
    pub fn contains(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }
}

/// Simple graph with optional edge direction and node/edge type maps.
///
/// No self-loops and no duplicate edges. Undirected graphs store each edge
/// once in `edges` and symmetric neighbor lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    directed: bool,
    edges: Vec<(u32, u32)>,
    node_type: Option<Vec<TypeId>>,
    edge_type: Option<Vec<TypeId>>,
    out_adj: Adjacency,
    in_adj: Adjacency,
    sym_adj: Adjacency,
}

impl Graph {
    /// Builds a graph from dense node ids. Self-loops and duplicates are
    /// removed; the returned report counts them.
    pub fn from_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        directed: bool,
    ) -> Result<(Graph, LoadReport)> {
        let typed: Vec<(usize, usize, Option<TypeId>)> =
            edges.into_iter().map(|(a, b)| (a, b, None)).collect();
        Self::from_typed_edges(n_nodes, typed, directed, None)
    }

    pub(crate) fn from_typed_edges(
        n_nodes: usize,
        edges: Vec<(usize, usize, Option<TypeId>)>,
        directed: bool,
        node_type: Option<Vec<TypeId>>,
    ) -> Result<(Graph, LoadReport)> {
        let mut report = LoadReport::default();
        let mut seen: HashMap<(u32, u32), ()> = HashMap::with_capacity(edges.len());
        let mut kept = Vec::with_capacity(edges.len());
        let mut types = Vec::with_capacity(edges.len());
        let any_typed = edges.iter().any(|e| e.2.is_some());
        if any_typed && edges.iter().any(|e| e.2.is_none()) {
            return Err(Error::Config(
                "edge types must be given for every edge or for none".into(),
            ));
        }
        for (a, b, t) in edges {
            for id in [a, b] {
                if id >= n_nodes {
                    return Err(Error::NodeBounds { id, n: n_nodes });
                }
            }
            if a == b {
                report.self_loops_dropped += 1;
                continue;
            }
            let key = if directed {
                (a as u32, b as u32)
            } else {
                (a.min(b) as u32, a.max(b) as u32)
            };
            if seen.insert(key, ()).is_some() {
                report.duplicates_dropped += 1;
                continue;
            }
            kept.push((a as u32, b as u32));
            if let Some(t) = t {
                types.push(t);
            }
        }
        if let Some(nt) = &node_type {
            if nt.len() != n_nodes {
                return Err(Error::Config(format!(
                    "node type map covers {} nodes, graph has {}",
                    nt.len(),
                    n_nodes
                )));
            }
        }
        Ok((
            Self::assemble(n_nodes, directed, kept, node_type, any_typed.then_some(types)),
            report,
        ))
    }

    fn assemble(
        n_nodes: usize,
        directed: bool,
        edges: Vec<(u32, u32)>,
        node_type: Option<Vec<TypeId>>,
        edge_type: Option<Vec<TypeId>>,
    ) -> Graph {
        let fwd = edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| (a as usize, b as usize, i));
        let bwd = edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| (b as usize, a as usize, i));
        let sym_adj = Adjacency::build(n_nodes, fwd.clone().chain(bwd.clone()));
        let (out_adj, in_adj) = if directed {
            (
                Adjacency::build(n_nodes, fwd),
                Adjacency::build(n_nodes, bwd),
            )
        } else {
            (sym_adj.clone(), sym_adj.clone())
        };
        Graph {
            n_nodes,
            directed,
            edges,
            node_type,
            edge_type,
            out_adj,
            in_adj,
            sym_adj,
        }
    }

    pub fn with_node_types(mut self, types: Vec<TypeId>) -> Result<Graph> {
        if types.len() != self.n_nodes {
            return Err(Error::Config(format!(
                "node type map covers {} nodes, graph has {}",
                types.len(),
                self.n_nodes
            )));
        }
        self.node_type = Some(types);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn node_types(&self) -> Option<&[TypeId]> {
        self.node_type.as_deref()
    }

    pub fn edge_types(&self) -> Option<&[TypeId]> {
        self.edge_type.as_deref()
    }

    pub fn node_type(&self, v: NodeId) -> Option<TypeId> {
        self.node_type.as_ref().map(|t| t[v])
    }

    /// Out-neighbors (all neighbors when undirected).
    pub fn out_neighbors(&self, v: NodeId) -> &[u32] {
        self.out_adj.neighbors(v)
    }

    pub fn in_neighbors(&self, v: NodeId) -> &[u32] {
        self.in_adj.neighbors(v)
    }

    /// Neighbors ignoring direction.
    pub fn neighbors(&self, v: NodeId) -> &[u32] {
        self.sym_adj.neighbors(v)
    }

    /// Degree ignoring direction.
    pub fn degree(&self, v: NodeId) -> usize {
        self.sym_adj.degree(v)
    }

    /// Directed edge test; symmetric for undirected graphs.
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.out_adj.contains(u, v)
    }

    pub fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.sym_adj.contains(u, v)
    }

    /// Type of the edge `u -> v` if it exists and the graph carries edge types.
    pub fn edge_type(&self, u: NodeId, v: NodeId) -> Option<TypeId> {
        let types = self.edge_type.as_ref()?;
        let pos = self.out_adj.position(u, v)?;
        Some(types[self.out_adj.edge_ids[pos] as usize])
    }

    /// SHA-256 over the dense edge list, direction flag and type maps.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_nodes as u64).to_le_bytes());
        h.update([self.directed as u8]);
        for &(a, b) in &self.edges {
            h.update(a.to_le_bytes());
            h.update(b.to_le_bytes());
        }
        if let Some(t) = &self.node_type {
            h.update(b"nt");
            for x in t {
                h.update(x.to_le_bytes());
            }
        }
        if let Some(t) = &self.edge_type {
            h.update(b"et");
            for x in t {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Induced subgraph on `keep` (sorted, distinct); node `keep[i]` becomes `i`.
    pub fn induced(&self, keep: &[NodeId]) -> Graph {
        let mut remap = vec![u32::MAX; self.n_nodes];
        for (i, &v) in keep.iter().enumerate() {
            remap[v] = i as u32;
        }
        let mut edges = Vec::new();
        let mut etypes = Vec::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            let (ra, rb) = (remap[a as usize], remap[b as usize]);
            if ra != u32::MAX && rb != u32::MAX {
                edges.push((ra, rb));
                if let Some(t) = &self.edge_type {
                    etypes.push(t[i]);
                }
            }
        }
        let node_type = self
            .node_type
            .as_ref()
            .map(|t| keep.iter().map(|&v| t[v]).collect());
        Self::assemble(
            keep.len(),
            self.directed,
            edges,
            node_type,
            self.edge_type.as_ref().map(|_| etypes),
        )
    }
}

/// Dense node attribute matrix, row `i` belongs to node `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    values: ndarray::Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: ndarray::Array2<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { op: "features" });
        }
        Ok(FeatureMatrix { values })
    }

    pub fn identity(n: usize) -> Self {
        FeatureMatrix {
            values: ndarray::Array2::eye(n),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &ndarray::Array2<f64> {
        &self.values
    }

    pub fn row(&self, v: NodeId) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(v)
    }

    pub fn select_rows(&self, keep: &[NodeId]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(ndarray::Axis(0), keep),
        }
    }

    pub fn check_rows(&self, n_nodes: usize) -> Result<()> {
        if self.n_rows() != n_nodes {
            return Err(Error::shape(
                "features",
                format!("{} rows for {} nodes", self.n_rows(), n_nodes),
            ));
        }
        Ok(())
    }

    /// Fraction of nonzero entries.
    pub fn density(&self) -> f64 {
        let nnz = self.values.iter().filter(|x| **x != 0.0).count();
        nnz as f64 / (self.values.len().max(1)) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (2, 0)], false).unwrap().0
    }

    #[test]
    fn undirected_triangle_is_symmetric() {
        let g = triangle();
        assert_eq!(g.n_edges(), 3);
        for v in 0..3 {
            assert_eq!(g.degree(v), 2);
        }
        assert!(g.has_edge(0, 2) && g.has_edge(2, 0));
    }

    #[test]
    fn duplicates_and_loops_are_removed() {
        let (g, rep) = Graph::from_edges(3, [(0, 1), (1, 0), (2, 2), (1, 2)], false).unwrap();
        assert_eq!(g.n_edges(), 2);
        assert_eq!(rep.self_loops_dropped, 1);
        assert_eq!(rep.duplicates_dropped, 1);
    }

    #[test]
    fn directed_keeps_both_orientations_separately() {
        let (g, rep) = Graph::from_edges(2, [(0, 1), (1, 0)], true).unwrap();
        assert_eq!(rep.duplicates_dropped, 0);
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.out_neighbors(0), &[1]);
        assert_eq!(g.in_neighbors(0), &[1]);
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let err = Graph::from_edges(2, [(0, 5)], false).unwrap_err();
        assert!(matches!(err, Error::NodeBounds { id: 5, n: 2 }));
    }

    #[test]
    fn hash_changes_with_direction() {
        let a = Graph::from_edges(2, [(0, 1)], false).unwrap().0;
        let b = Graph::from_edges(2, [(0, 1)], true).unwrap().0;
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
