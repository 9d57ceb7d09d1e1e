//! Runs base GCN and the motif-regularized GCN on the planted-role benchmark.
//!
//! ```text
//! cargo run --release --example planted -- '{"noise": 1.5}' '{"lr": 0.01}' 5 0.1 0
//! ```
//! Arguments: generator overrides, training overrides (dotted keys reach
//! one level down), number of seeds, train ratio, first seed. Set `GRID=1`
//! to pick each arm's learning rate on validation accuracy.

use std::time::Instant;

use infomotif::eval::summarize;
use infomotif::graph::make_splits;
use infomotif::motif::{build_index, builtin_catalog, DirectedSet};
use infomotif::synth::{planted_roles, PlantedConfig};
use infomotif::trainer::{train, Dataset, TrainConfig, Variant};
use serde_json::Value;

fn merge<T: serde::Serialize + serde::de::DeserializeOwned>(base: &T, patch: &str) -> T {
    let mut v = serde_json::to_value(base).unwrap();
    let p: Value = serde_json::from_str(patch).unwrap();
    for (k, x) in p.as_object().unwrap() {
        if let Some((outer, inner)) = k.split_once('.') {
            v[outer][inner] = x.clone();
        } else {
            v[k] = x.clone();
        }
    }
    serde_json::from_value(v).unwrap()
}

fn main() {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let gen: PlantedConfig = merge(&PlantedConfig::default(), args.first().map_or("{}", String::as_str));
    let mut base_cfg = TrainConfig::default();
    base_cfg.gnn.hidden = 64;
    base_cfg.gnn.out_dim = 64;
    let cfg: TrainConfig = merge(&base_cfg, args.get(1).map_or("{}", String::as_str));
    let seeds: u64 = args.get(2).map_or(5, |s| s.parse().unwrap());
    let train_ratio: f64 = args.get(3).map_or(0.1, |s| s.parse().unwrap());
    let first: u64 = args.get(4).map_or(0, |s| s.parse().unwrap());
    let mut results = [Vec::new(), Vec::new()];
    for seed in first..first + seeds {
        let p = planted_roles(&gen, seed).unwrap();
        let split = make_splits(&p.labels, train_ratio, 0.1, seed).unwrap();
        let catalog = builtin_catalog(false, DirectedSet::Full);
        let index = build_index(&p.graph, &catalog).unwrap();
        let ds = Dataset {
            graph: p.graph,
            features: p.features,
            labels: p.labels,
            split,
            catalog,
            index,
        };
        for (k, variant) in [Variant::Base, Variant::InfoMotif].into_iter().enumerate() {
            let t = Instant::now();
            let c = TrainConfig { variant, seed, ..cfg.clone() };
            let out = if std::env::var("GRID").is_ok() {
                infomotif::trainer::train_lr_grid(&ds.view(), &c, &infomotif::trainer::LR_GRID).unwrap()
            } else {
                train(&ds.view(), &c).unwrap()
            };
            println!(
                "seed {seed} {variant:?}: test {:.4} (best epoch {}, {:.1}s)",
                out.report.test_acc,
                out.report.best_epoch,
                t.elapsed().as_secs_f64()
            );
            results[k].push(out.report.test_acc);
        }
    }
    let b = summarize(&results[0]);
    let f = summarize(&results[1]);
    println!("base {:.4} infomotif {:.4} gain {:+.4}", b.mean, f.mean, f.mean - b.mean);
}
