//! Three-node network motifs: definitions, canonical codes and catalogs.
//!
//! A motif is stored as a 3x3 cell matrix over its slots. Cell `(i, j)` is
//! `0` when there is no edge `i -> j`, `1` for an untyped edge and `2 + t`
//! for an edge of schema type `t`. Undirected motifs have symmetric cells.

mod index;
mod sample;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, Schema, TypeId};

pub use index::{build_index, build_index_threaded, MotifInstance, MotifInstanceIndex};
pub use sample::{sample_instances, sample_negative_instance, NegativeSample, NEGATIVE_RETRIES};

pub type Cells = [[u16; 3]; 3];

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

const UNTYPED_SLOT: u16 = u16::MAX;

/// Byte string identifying a (typed) 3-node subgraph up to isomorphism.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalCode(Vec<u8>);

impl CanonicalCode {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for CanonicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalCode({})", hex::encode(&self.0))
    }
}

fn encode(directed: bool, cells: &Cells, types: Option<&[TypeId; 3]>, p: &[usize; 3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 6 + 12);
    out.push(directed as u8);
    for &slot in p {
        let t = types.map_or(UNTYPED_SLOT, |t| t[slot]);
        out.extend_from_slice(&t.to_be_bytes());
    }
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                out.extend_from_slice(&cells[p[i]][p[j]].to_be_bytes());
            }
        }
    }
    out
}

/// Lexicographic minimum of the (slot types, cells) encoding over all six
/// slot permutations.
pub fn canonical_code(directed: bool, cells: &Cells, types: Option<&[TypeId; 3]>) -> CanonicalCode {
    let best = PERMS
        .iter()
        .map(|p| encode(directed, cells, types, p))
        .min()
        .unwrap();
    CanonicalCode(best)
}

fn weakly_connected(cells: &Cells) -> bool {
    let adj = |i: usize, j: usize| cells[i][j] != 0 || cells[j][i] != 0;
    let pairs = [adj(0, 1), adj(0, 2), adj(1, 2)];
    pairs.iter().filter(|&&b| b).count() >= 2
}

/// How a catalog reads types off the graph when classifying a triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Typing {
    Untyped,
    /// Slot node types plus edge types (explicit, or implied by the schema).
    Typed,
}

/// A 3-node motif pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotifSpec {
    pub name: String,
    pub directed: bool,
    cells: Cells,
    slot_types: Option<[TypeId; 3]>,
    code: CanonicalCode,
}

impl MotifSpec {
    pub fn new(name: impl Into<String>, directed: bool, cells: Cells, slot_types: Option<[TypeId; 3]>) -> Result<Self> {
        for (i, row) in cells.iter().enumerate() {
            if row[i] != 0 {
                return Err(Error::Config("motif pattern has a self-loop".into()));
            }
        }
        if !directed && (0..3).any(|i| (0..3).any(|j| cells[i][j] != cells[j][i])) {
            return Err(Error::Config("undirected motif pattern is not symmetric".into()));
        }
        if !weakly_connected(&cells) {
            return Err(Error::Config("motif pattern is not connected".into()));
        }
        let code = canonical_code(directed, &cells, slot_types.as_ref());
        Ok(MotifSpec {
            name: name.into(),
            directed,
            cells,
            slot_types,
            code,
        })
    }

    /// Node count; fixed at 3.
    pub fn k(&self) -> usize {
        3
    }

    pub fn cells(&self) -> &Cells {
        &self.cells
    }

    pub fn slot_types(&self) -> Option<&[TypeId; 3]> {
        self.slot_types.as_ref()
    }

    pub fn code(&self) -> &CanonicalCode {
        &self.code
    }

    /// Pattern edges as slot pairs; undirected edges are listed once with `i < j`.
    pub fn edge_pattern(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j && self.cells[i][j] != 0 && (self.directed || i < j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.edge_pattern().len()
    }
}

/// Which directed motifs to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DirectedSet {
    /// All 13 weakly connected 3-node digraphs.
    Full,
    /// The five patterns without reciprocated edges: out-star, in-star,
    /// chain, feed-forward loop and cycle.
    Acyclic5,
}

/// Ordered motif list with a code lookup table.
#[derive(Clone, Debug)]
pub struct Catalog {
    motifs: Vec<MotifSpec>,
    directed: bool,
    typing: Typing,
    schema: Option<Schema>,
    lookup: HashMap<CanonicalCode, usize>,
}

impl Catalog {
    fn from_motifs(motifs: Vec<MotifSpec>, directed: bool, typing: Typing, schema: Option<Schema>) -> Self {
        let lookup = motifs
            .iter()
            .enumerate()
            .map(|(i, m)| (m.code.clone(), i))
            .collect();
        Catalog {
            motifs,
            directed,
            typing,
            schema,
            lookup,
        }
    }

    /// Restricts to the motifs at `keep` (in that order).
    pub fn subset(&self, keep: &[usize]) -> Catalog {
        let motifs = keep.iter().map(|&i| self.motifs[i].clone()).collect();
        Self::from_motifs(motifs, self.directed, self.typing, self.schema.clone())
    }

    pub fn len(&self) -> usize {
        self.motifs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motifs.is_empty()
    }

    pub fn motifs(&self) -> &[MotifSpec] {
        &self.motifs
    }

    pub fn get(&self, t: usize) -> &MotifSpec {
        &self.motifs[t]
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn typing(&self) -> Typing {
        self.typing
    }

    pub fn find(&self, code: &CanonicalCode) -> Option<usize> {
        self.lookup.get(code).copied()
    }

    /// Stable identifier of the catalog contents.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.motifs {
            h.update((m.code.0.len() as u32).to_le_bytes());
            h.update(&m.code.0);
        }
        hex::encode(h.finalize())
    }

    /// Induced cells and slot types of `nodes` in `g`, read the way this
    /// catalog expects.
    pub fn triple_cells(&self, g: &Graph, nodes: [NodeId; 3]) -> (Cells, Option<[TypeId; 3]>) {
        let mut cells = [[0u16; 3]; 3];
        let types = match self.typing {
            Typing::Untyped => None,
            Typing::Typed => g
                .node_types()
                .map(|t| [t[nodes[0]], t[nodes[1]], t[nodes[2]]]),
        };
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let (a, b) = (nodes[i], nodes[j]);
                let present = if self.directed {
                    g.has_edge(a, b)
                } else {
                    g.adjacent(a, b)
                };
                if !present {
                    continue;
                }
                cells[i][j] = match (self.typing, types) {
                    (Typing::Typed, Some(ty)) => {
                        let mut et = g.edge_type(a, b);
                        if !self.directed {
                            et = et.or_else(|| g.edge_type(b, a));
                        }
                        let et = et.or_else(|| {
                            self.schema
                                .as_ref()
                                .and_then(|s| s.edge_type_between(ty[i], ty[j], self.directed))
                        });
                        et.map_or(1, |t| 2 + t)
                    }
                    _ => 1,
                };
            }
        }
        (cells, types)
    }

    /// Catalog index of the motif the induced triple matches, if any.
    pub fn classify(&self, g: &Graph, nodes: [NodeId; 3]) -> Option<usize> {
        let (cells, types) = self.triple_cells(g, nodes);
        if !weakly_connected(&cells) {
            return None;
        }
        self.find(&canonical_code(self.directed, &cells, types.as_ref()))
    }
}

fn sym(pairs: &[(usize, usize)]) -> Cells {
    let mut c = [[0u16; 3]; 3];
    for &(a, b) in pairs {
        c[a][b] = 1;
        c[b][a] = 1;
    }
    c
}

fn dir(pairs: &[(usize, usize)]) -> Cells {
    let mut c = [[0u16; 3]; 3];
    for &(a, b) in pairs {
        c[a][b] = 1;
    }
    c
}

fn acyclic5() -> Vec<MotifSpec> {
    let spec = |name: &str, e: &[(usize, usize)]| MotifSpec::new(name, true, dir(e), None).unwrap();
    vec![
        spec("out-star", &[(0, 1), (0, 2)]),
        spec("in-star", &[(1, 0), (2, 0)]),
        spec("chain", &[(0, 1), (1, 2)]),
        spec("feed-forward", &[(0, 1), (1, 2), (0, 2)]),
        spec("cycle", &[(0, 1), (1, 2), (2, 0)]),
    ]
}

/// Every weakly connected 3-node digraph up to isomorphism. The five
/// patterns of [`DirectedSet::Acyclic5`] come first under their names; the
/// rest follow ordered by edge count then code.
fn all_directed() -> Vec<MotifSpec> {
    let named = acyclic5();
    let mut others: BTreeMap<(usize, CanonicalCode), Cells> = BTreeMap::new();
    let slots: Vec<(usize, usize)> = (0..3)
        .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    for mask in 0u32..64 {
        let mut cells = [[0u16; 3]; 3];
        for (bit, &(i, j)) in slots.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                cells[i][j] = 1;
            }
        }
        if !weakly_connected(&cells) {
            continue;
        }
        let code = canonical_code(true, &cells, None);
        if named.iter().any(|m| m.code == code) {
            continue;
        }
        others
            .entry((mask.count_ones() as usize, code))
            .or_insert(cells);
    }
    let mut out = named;
    for (i, (_, cells)) in others.into_iter().enumerate() {
        out.push(MotifSpec::new(format!("reciprocal-{}", i + 1), true, cells, None).unwrap());
    }
    out
}

/// Built-in untyped catalogs: wedge and triangle when undirected; the full
/// 13-motif set or the 5-motif acyclic subset when directed.
pub fn builtin_catalog(directed: bool, set: DirectedSet) -> Catalog {
    let motifs = if directed {
        match set {
            DirectedSet::Full => all_directed(),
            DirectedSet::Acyclic5 => acyclic5(),
        }
    } else {
        vec![
            MotifSpec::new("wedge", false, sym(&[(0, 1), (0, 2)]), None).unwrap(),
            MotifSpec::new("triangle", false, sym(&[(0, 1), (1, 2), (0, 2)]), None).unwrap(),
        ]
    };
    Catalog::from_motifs(motifs, directed, Typing::Untyped, None)
}

/// Every assignment of schema node types to the slots of each base motif
/// such that all pattern edges are permitted schema edges, deduplicated by
/// canonical code.
pub fn typed_catalog(schema: &Schema, base: &Catalog) -> Result<Catalog> {
    if schema.node_types.is_empty() || schema.edge_types.is_empty() {
        return Err(Error::Schema("empty schema".into()));
    }
    let nt = schema.n_node_types() as TypeId;
    let directed = base.directed;
    let mut seen = HashMap::new();
    let mut motifs = Vec::new();
    for m in &base.motifs {
        for a in 0..nt {
            for b in 0..nt {
                for c in 0..nt {
                    let types = [a, b, c];
                    let mut cells = [[0u16; 3]; 3];
                    let mut ok = true;
                    for i in 0..3 {
                        for j in 0..3 {
                            if i == j || m.cells[i][j] == 0 {
                                continue;
                            }
                            match schema.edge_type_between(types[i], types[j], directed) {
                                Some(t) => cells[i][j] = 2 + t,
                                None => ok = false,
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let code = canonical_code(directed, &cells, Some(&types));
                    if seen.insert(code, ()).is_some() {
                        continue;
                    }
                    let label: Vec<&str> = types
                        .iter()
                        .map(|&t| schema.node_types[t as usize].as_str())
                        .collect();
                    motifs.push(MotifSpec::new(
                        format!("{}[{}]", m.name, label.join("-")),
                        directed,
                        cells,
                        Some(types),
                    )?);
                }
            }
        }
    }
    Ok(Catalog::from_motifs(
        motifs,
        directed,
        Typing::Typed,
        Some(schema.clone()),
    ))
}
