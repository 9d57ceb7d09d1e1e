//! Accuracy, quartile breakdowns, sensitivity sweeps and the runtime benchmark.

mod ba;
mod bench;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::graph::{khop_neighborhood, FeatureMatrix, Graph, NodeId, Split};

pub use ba::generate_ba_graph;
pub use bench::{linear_fit, q_sweep, runtime_bench, BenchRow, LinearFit, QSweepRow};

/// Fraction of `nodes` whose prediction equals the label at the same position.
pub fn accuracy(preds: &[usize], nodes: &[NodeId], labels: &[usize]) -> f64 {
    assert_eq!(nodes.len(), labels.len(), "one label per evaluated node");
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .zip(labels)
        .filter(|(&v, &y)| preds[v] == y)
        .count();
    hits as f64 / nodes.len() as f64
}

/// Mean with sample standard deviation; `std` needs at least two values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: Option<f64>,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    let mean = if n == 0 { 0.0 } else { values.iter().sum::<f64>() / n as f64 };
    let std = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Summary { mean, std, n }
}

/// One row of a binned accuracy table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin: usize,
    pub n: usize,
    /// Smallest and largest key inside the bin.
    pub lo: f64,
    pub hi: f64,
    pub accuracy: f64,
}

/// Sorts `(key, node)` pairs by key (node id breaks ties) and cuts them into
/// four groups whose sizes differ by at most one.
pub fn quartiles(mut keyed: Vec<(f64, NodeId)>) -> Vec<Vec<(f64, NodeId)>> {
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = keyed.len();
    let mut out = Vec::with_capacity(4);
    let mut rest = keyed.into_iter();
    for q in 0..4 {
        let size = (q + 1) * n / 4 - q * n / 4;
        out.push(rest.by_ref().take(size).collect());
    }
    out
}

fn bin_rows(groups: Vec<Vec<(f64, NodeId)>>, preds: &[usize], label_of: &dyn Fn(NodeId) -> usize) -> Vec<BinRow> {
    groups
        .into_iter()
        .enumerate()
        .map(|(i, grp)| {
            let nodes: Vec<NodeId> = grp.iter().map(|x| x.1).collect();
            let labels: Vec<usize> = nodes.iter().map(|&v| label_of(v)).collect();
            BinRow {
                bin: i + 1,
                n: grp.len(),
                lo: grp.first().map_or(f64::NAN, |x| x.0),
                hi: grp.last().map_or(f64::NAN, |x| x.0),
                accuracy: accuracy(preds, &nodes, &labels),
            }
        })
        .collect()
}

/// Accuracy of test nodes binned by degree. Without explicit upper bin
/// edges the bins are degree quartiles of the test nodes.
pub fn degree_report(
    g: &Graph,
    test: &[NodeId],
    preds: &[usize],
    labels: &[usize],
    edges: Option<&[usize]>,
) -> Vec<BinRow> {
    let label_of = label_lookup(test, labels);
    let keyed: Vec<(f64, NodeId)> = test.iter().map(|&v| (g.degree(v) as f64, v)).collect();
    let groups = match edges {
        None => quartiles(keyed),
        Some(edges) => {
            let mut groups = vec![Vec::new(); edges.len() + 1];
            for (k, v) in keyed {
                let b = edges.iter().position(|&e| k <= e as f64).unwrap_or(edges.len());
                groups[b].push((k, v));
            }
            for grp in &mut groups {
                grp.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            }
            groups
        }
    };
    bin_rows(groups, preds, &label_of)
}

fn label_lookup<'a>(nodes: &'a [NodeId], labels: &'a [usize]) -> impl Fn(NodeId) -> usize + 'a {
    let map: std::collections::HashMap<NodeId, usize> = nodes.iter().copied().zip(labels.iter().copied()).collect();
    move |v| map[&v]
}

/// 2-hop neighborhood of `v`, excluding `v`.
fn two_hop(g: &Graph, v: NodeId) -> Vec<NodeId> {
    khop_neighborhood(g, &[v], 2).into_iter().filter(|&u| u != v).collect()
}

/// Test-node accuracy by quartile of the fraction of training nodes in the
/// 2-hop neighborhood; Q1 holds the smallest fractions.
pub fn label_fraction_report(g: &Graph, split: &Split, preds: &[usize], labels: &[usize]) -> Vec<BinRow> {
    let train: HashSet<NodeId> = split.train.iter().copied().collect();
    let keyed = split
        .test
        .iter()
        .map(|&v| {
            let hood = two_hop(g, v);
            let frac = if hood.is_empty() {
                0.0
            } else {
                hood.iter().filter(|u| train.contains(u)).count() as f64 / hood.len() as f64
            };
            (frac, v)
        })
        .collect();
    bin_rows(quartiles(keyed), preds, &label_lookup(&split.test, labels))
}

/// Mean pairwise cosine distance among `rows` of `x`. Two zero vectors are at
/// distance 0; a zero and a nonzero vector at distance 1.
pub fn mean_pairwise_cosine_distance(x: &FeatureMatrix, rows: &[NodeId]) -> f64 {
    let k = rows.len();
    if k < 2 {
        return 0.0;
    }
    let dim = x.n_cols();
    let mut sum = vec![0.0; dim];
    let mut sq_norms = 0.0;
    let mut zeros = 0usize;
    for &r in rows {
        let row = x.row(r);
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            zeros += 1;
            continue;
        }
        for (s, &v) in sum.iter_mut().zip(row.iter()) {
            *s += v / norm;
        }
        sq_norms += 1.0;
    }
    if zeros > 1 {
        log::debug!("{zeros} zero attribute vectors treated as identical");
    }
    let total: f64 = sum.iter().map(|s| s * s).sum();
    let sim_pairs = (total - sq_norms) / 2.0 + (zeros * zeros.saturating_sub(1)) as f64 / 2.0;
    let pairs = (k * (k - 1)) as f64 / 2.0;
    1.0 - sim_pairs / pairs
}

/// Test-node accuracy by quartile of 2-hop attribute diversity.
pub fn attribute_diversity_report(
    g: &Graph,
    x: &FeatureMatrix,
    test: &[NodeId],
    preds: &[usize],
    labels: &[usize],
) -> Vec<BinRow> {
    let keyed = test
        .iter()
        .map(|&v| (mean_pairwise_cosine_distance(x, &khop_neighborhood(g, &[v], 2)), v))
        .collect();
    bin_rows(quartiles(keyed), preds, &label_lookup(test, labels))
}

/// CSV rendering of a binned table.
pub fn bins_csv(rows: &[BinRow]) -> String {
    let mut s = String::from("bin,n,lo,hi,accuracy\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.bin, r.n, r.lo, r.hi, r.accuracy));
    }
    s
}
