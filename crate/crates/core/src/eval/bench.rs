use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{generate_ba_graph, summarize, Summary};
use crate::error::{Error, Result};
use crate::graph::{make_splits, FeatureMatrix, LabelSet};
use crate::motif::{build_index, builtin_catalog, DirectedSet};
use crate::rng::{self, Stream};
use crate::trainer::{train, Dataset, TrainConfig, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSweepRow {
    pub q: usize,
    pub accuracies: Vec<f64>,
    pub summary: Summary,
}

/// Test accuracy of the configured model for each `Q`, one run per dataset
/// with the paired seed.
pub fn q_sweep(datasets: &[(u64, &Dataset)], config: &TrainConfig, qs: &[usize]) -> Result<Vec<QSweepRow>> {
    qs.iter()
        .map(|&q| {
            let accuracies = datasets
                .iter()
                .map(|&(seed, ds)| {
                    let cfg = TrainConfig { q, seed, ..config.clone() };
                    Ok(train(&ds.view(), &cfg)?.report.test_acc)
                })
                .collect::<Result<Vec<f64>>>()?;
            let summary = summarize(&accuracies);
            Ok(QSweepRow { q, accuracies, summary })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub edges: usize,
    pub base_epoch_secs: f64,
    pub infomotif_epoch_secs: f64,
    /// Time spent in the MI phase per epoch.
    pub mi_phase_secs: f64,
    /// `infomotif_epoch_secs - base_epoch_secs`.
    pub overhead_secs: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// Synthetic classification task on a BA graph: uniform random features and
/// labels, undirected motifs, 40/10/50 split.
pub fn ba_dataset(n: usize, m: usize, n_features: usize, n_classes: usize, seed: u64) -> Result<Dataset> {
    let graph = generate_ba_graph(n, m, seed)?;
    let mut rng = rng::stream(seed, Stream::Data);
    let x = Array2::from_shape_fn((n, n_features), |_| rng.gen_range(-1.0..1.0));
    let features = FeatureMatrix::new(x)?;
    let labels = LabelSet::new((0..n).map(|_| Some(rng.gen_range(0..n_classes as u32))).collect(), n_classes)?;
    let split = make_splits(&labels, 0.4, 0.1, seed)?;
    let catalog = builtin_catalog(false, DirectedSet::Full);
    let index = build_index(&graph, &catalog)?;
    Ok(Dataset {
        graph,
        features,
        labels,
        split,
        catalog,
        index,
    })
}

/// Per-epoch wall time of the base and regularized models on BA graphs of
/// each size. Every run trains exactly `config.max_epochs` epochs; medians
/// over epochs are reported.
pub fn runtime_bench(sizes: &[usize], m: usize, config: &TrainConfig, seed: u64) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() {
        return Err(Error::Config("no benchmark sizes".into()));
    }
    let cfg = TrainConfig {
        patience: config.max_epochs,
        seed,
        ..config.clone()
    };
    sizes
        .iter()
        .map(|&n| {
            let ds = ba_dataset(n, m, 16, 4, seed)?;
            let base = train(&ds.view(), &TrainConfig { variant: Variant::Base, ..cfg.clone() })?;
            let full = train(&ds.view(), &TrainConfig { variant: Variant::InfoMotif, ..cfg.clone() })?;
            let b = median(base.timings.epoch_secs.clone());
            let f = median(full.timings.epoch_secs.clone());
            log::info!("bench n={n}: base {b:.4}s infomotif {f:.4}s per epoch");
            Ok(BenchRow {
                n,
                edges: ds.graph.n_edges(),
                base_epoch_secs: b,
                infomotif_epoch_secs: f,
                mi_phase_secs: median(full.timings.mi_secs.clone()),
                overhead_secs: f - b,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line_fits_perfectly() {
        let f = linear_fit(&[1.0, 2.0, 4.0, 8.0], &[3.0, 5.0, 9.0, 17.0]);
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
