//! Text formats: edge lists, features, labels and node types.
//!
//! Node ids in input files are arbitrary non-negative integers. They are
//! mapped to dense ids in order of first appearance in the edge list; the
//! feature, label and type files are keyed by the original ids.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{FeatureMatrix, Graph, LabelSet, NodeId, Schema, TypeId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Mapping between original node ids and dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeIds {
    raw: Vec<u64>,
    index: HashMap<u64, NodeId>,
}

impl NodeIds {
    pub fn identity(n: usize) -> Self {
        let raw: Vec<u64> = (0..n as u64).collect();
        let index = raw.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        NodeIds { raw, index }
    }

    fn intern(&mut self, raw: u64) -> NodeId {
        let next = self.raw.len();
        *self.index.entry(raw).or_insert_with(|| {
            self.raw.push(raw);
            next
        })
    }

    pub fn dense(&self, raw: u64) -> Option<NodeId> {
        self.index.get(&raw).copied()
    }

    pub fn raw(&self, dense: NodeId) -> u64 {
        self.raw[dense]
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Restricts to `keep` (dense ids, sorted); `keep[i]` becomes dense id `i`.
    pub fn select(&self, keep: &[NodeId]) -> NodeIds {
        let mut out = NodeIds::default();
        for &v in keep {
            out.intern(self.raw[v]);
        }
        out
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Yields `(line_number, fields)` for each non-blank, non-comment line.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_id(path: &Path, line: usize, tok: &str) -> Result<u64> {
    let v: u64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid node id {tok:?}")))?;
    if v > u32::MAX as u64 {
        return Err(Error::NodeBounds {
            id: v as usize,
            n: u32::MAX as usize,
        });
    }
    Ok(v)
}

/// Loads a whitespace separated `src dst [edge_type]` edge list.
pub fn load_graph(
    path: &Path,
    directed: bool,
    node_types: Option<&Path>,
) -> Result<(Graph, NodeIds, LoadReport)> {
    let text = read(path)?;
    let mut ids = NodeIds::default();
    let mut edges = Vec::new();
    for (line, f) in records(&text) {
        if f.len() < 2 || f.len() > 3 {
            return Err(parse_err(path, line, "expected `src dst [edge_type]`"));
        }
        let a = ids.intern(parse_id(path, line, f[0])?);
        let b = ids.intern(parse_id(path, line, f[1])?);
        let t = match f.get(2) {
            Some(tok) => Some(
                tok.parse::<TypeId>()
                    .map_err(|_| parse_err(path, line, format!("invalid edge type {tok:?}")))?,
            ),
            None => None,
        };
        edges.push((a, b, t));
    }
    let types = match node_types {
        Some(p) => Some(load_node_types(p, &ids, None)?),
        None => None,
    };
    let (g, report) = Graph::from_typed_edges(ids.len(), edges, directed, types)?;
    if report.self_loops_dropped > 0 {
        log::warn!(
            "{}: dropped {} self-loop(s)",
            path.display(),
            report.self_loops_dropped
        );
    }
    Ok((g, ids, report))
}

/// Serializes with dense ids; loading the result reproduces `g`.
pub fn write_edge_list(g: &Graph, path: &Path) -> Result<()> {
    fs::write(path, edge_list_string(g)).map_err(|e| Error::io(path, e))
}

pub fn edge_list_string(g: &Graph) -> String {
    let mut s = String::new();
    for (i, &(a, b)) in g.edges().iter().enumerate() {
        match g.edge_types() {
            Some(t) => writeln!(s, "{a} {b} {}", t[i]).unwrap(),
            None => writeln!(s, "{a} {b}").unwrap(),
        }
    }
    s
}

/// Dense CSV (row `i` holds original node `i`) when the file ends in `.csv`,
/// otherwise sparse `node col value` triplets.
pub fn load_features(path: &Path, ids: &NodeIds) -> Result<FeatureMatrix> {
    let text = read(path)?;
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    let n = ids.len();
    let values = if is_csv {
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut width = None;
        let data_lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        for (raw_row, (i, l)) in data_lines.enumerate() {
            let line = i + 1;
            let vals: std::result::Result<Vec<f64>, _> =
                l.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|_| parse_err(path, line, "invalid number"))?;
            match width {
                None => width = Some(vals.len()),
                Some(w) if w != vals.len() => {
                    return Err(parse_err(path, line, format!("expected {w} columns")))
                }
                _ => {}
            }
            if let Some(v) = ids.dense(raw_row as u64) {
                rows.push((v, vals));
            }
        }
        let width = width.unwrap_or(0);
        if rows.len() != n {
            return Err(Error::shape(
                "features",
                format!("{} of {} graph nodes have feature rows", rows.len(), n),
            ));
        }
        let mut m = Array2::zeros((n, width));
        for (v, vals) in rows {
            for (j, x) in vals.into_iter().enumerate() {
                m[[v, j]] = x;
            }
        }
        m
    } else {
        let mut trip = Vec::new();
        let mut width = 0;
        for (line, f) in records(&text) {
            if f.len() != 3 {
                return Err(parse_err(path, line, "expected `node col value`"));
            }
            let raw = parse_id(path, line, f[0])?;
            let col: usize = f[1]
                .parse()
                .map_err(|_| parse_err(path, line, "invalid column"))?;
            let val: f64 = f[2]
                .parse()
                .map_err(|_| parse_err(path, line, "invalid value"))?;
            width = width.max(col + 1);
            if let Some(v) = ids.dense(raw) {
                trip.push((v, col, val));
            }
        }
        let mut m = Array2::zeros((n, width));
        for (v, c, x) in trip {
            m[[v, c]] = x;
        }
        m
    };
    FeatureMatrix::new(values)
}

/// `node class` lines. Classes may be integers or names; names are numbered
/// in sorted order.
pub fn load_labels(path: &Path, ids: &NodeIds) -> Result<LabelSet> {
    let text = read(path)?;
    let mut pairs = Vec::new();
    for (line, f) in records(&text) {
        if f.len() != 2 {
            return Err(parse_err(path, line, "expected `node class`"));
        }
        let raw = parse_id(path, line, f[0])?;
        pairs.push((raw, f[1].to_string()));
    }
    let numeric = pairs.iter().all(|(_, c)| c.parse::<u32>().is_ok());
    let names: Vec<String> = if numeric {
        Vec::new()
    } else {
        pairs
            .iter()
            .map(|(_, c)| c.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    let mut labels = vec![None; ids.len()];
    let mut n_classes = 0;
    for (raw, c) in pairs {
        let class = if numeric {
            c.parse::<u32>().unwrap()
        } else {
            names.binary_search(&c).unwrap() as u32
        };
        n_classes = n_classes.max(class as usize + 1);
        if let Some(v) = ids.dense(raw) {
            labels[v] = Some(class);
        }
    }
    LabelSet::new(labels, n_classes)
}

/// `node type` lines. Types may be integers or names; names are resolved
/// through `schema` when given, otherwise numbered in sorted order.
pub fn load_node_types(path: &Path, ids: &NodeIds, schema: Option<&Schema>) -> Result<Vec<TypeId>> {
    let text = read(path)?;
    let mut pairs = Vec::new();
    for (line, f) in records(&text) {
        if f.len() != 2 {
            return Err(parse_err(path, line, "expected `node type`"));
        }
        pairs.push((line, parse_id(path, line, f[0])?, f[1].to_string()));
    }
    let numeric = pairs.iter().all(|(_, _, t)| t.parse::<TypeId>().is_ok());
    let sorted: Vec<String> = pairs
        .iter()
        .map(|p| p.2.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out: Vec<Option<TypeId>> = vec![None; ids.len()];
    for (line, raw, t) in pairs {
        let ty = if numeric {
            t.parse().unwrap()
        } else if let Some(s) = schema {
            s.type_id(&t)
                .ok_or_else(|| parse_err(path, line, format!("type {t:?} not in schema")))?
        } else {
            sorted.binary_search(&t).unwrap() as TypeId
        };
        if let Some(v) = ids.dense(raw) {
            out[v] = Some(ty);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(v, t)| {
            t.ok_or_else(|| {
                Error::Config(format!("node {} has no type in {}", ids.raw(v), path.display()))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn triangle_file() {
        let f = file("0 1\n1 2\n2 0\n");
        let (g, _, rep) = load_graph(f.path(), false, None).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 3);
        assert!((0..3).all(|v| g.degree(v) == 2));
        assert_eq!(rep, LoadReport::default());
    }

    #[test]
    fn self_loop_is_counted() {
        let f = file("0 0\n0 1\n");
        let (g, _, rep) = load_graph(f.path(), false, None).unwrap();
        assert_eq!(rep.self_loops_dropped, 1);
        assert_eq!(g.n_edges(), 1);
    }

    #[test]
    fn ids_follow_first_appearance() {
        let f = file("# comment\n10 7\n7 3 # trailing\n");
        let (g, ids, _) = load_graph(f.path(), false, None).unwrap();
        assert_eq!(ids.dense(10), Some(0));
        assert_eq!(ids.dense(7), Some(1));
        assert_eq!(ids.dense(3), Some(2));
        assert!(g.adjacent(1, 2));
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = file("0 1\n\n1 x\n");
        match load_graph(f.path(), false, None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn overflowing_id_is_bounds_error() {
        let f = file("0 99999999999\n");
        assert!(matches!(
            load_graph(f.path(), false, None).unwrap_err(),
            Error::NodeBounds { .. }
        ));
    }

    #[test]
    fn edge_types_are_read() {
        let f = file("0 1 2\n1 2 0\n");
        let (g, _, _) = load_graph(f.path(), true, None).unwrap();
        assert_eq!(g.edge_type(0, 1), Some(2));
        assert_eq!(g.edge_type(1, 2), Some(0));
        assert_eq!(g.edge_type(1, 0), None);
    }

    #[test]
    fn dense_and_sparse_features_agree() {
        let g = file("1 0\n");
        let (_, ids, _) = load_graph(g.path(), false, None).unwrap();
        let dense = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        fs::write(dense.path(), "1.0,0.0\n0.0,2.5\n").unwrap();
        let sparse = file("0 0 1.0\n1 1 2.5\n");
        let a = load_features(dense.path(), &ids).unwrap();
        let b = load_features(sparse.path(), &ids).unwrap();
        assert_eq!(a, b);
        // raw node 1 is dense node 0
        assert_eq!(a.row(0).to_vec(), vec![0.0, 2.5]);
    }

    #[test]
    fn labels_by_name_are_sorted() {
        let g = file("0 1\n1 2\n");
        let (_, ids, _) = load_graph(g.path(), false, None).unwrap();
        let l = load_labels(file("0 beta\n2 alpha\n").path(), &ids).unwrap();
        assert_eq!(l.n_classes(), 2);
        assert_eq!(l.get(0), Some(1));
        assert_eq!(l.get(1), None);
        assert_eq!(l.get(2), Some(0));
    }
}
