//! Subcommand implementations behind the `infomotif` binary.
//!
//! Configuration is a flat JSON object with dotted keys such as
//! `"train.gnn.hidden": 64`. Every key must name a field of [`CliConfig`];
//! command-line flags are applied on top of the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{
    accuracy, attribute_diversity_report, bins_csv, degree_report, label_fraction_report, linear_fit,
    runtime_bench, summarize, BenchRow, BinRow, LinearFit, Summary,
};
use crate::gnn::{argmax_rows, Propagation};
use crate::gradcheck::{run_suite, OpReport};
use crate::graph::{load_features, load_graph, load_labels, make_splits, FeatureMatrix, Graph, Schema};
use crate::motif::{build_index_threaded, builtin_catalog, typed_catalog, Catalog, DirectedSet};
use crate::synth::{planted_roles, PlantedConfig};
use crate::trainer::{
    load_checkpoint, save_checkpoint, train, train_lr_grid, Dataset, TrainConfig, LR_GRID,
};

/// Environment variable naming the directory relative data paths resolve
/// against.
pub const DATA_ENV: &str = "INFOMOTIF_DATA";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `planted` generates the synthetic benchmark instead of reading files.
    pub source: String,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub node_types: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub directed: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: "files".into(),
            edges: None,
            features: None,
            labels: None,
            node_types: None,
            schema: None,
            directed: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogConfig {
    /// `full` (13 motifs) or `acyclic5`; ignored for undirected graphs.
    pub directed_set: String,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            directed_set: "full".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train_ratio: f64,
    pub val_ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_ratio: 0.4,
            val_ratio: 0.1,
        }
    }
}

/// Everything a run needs, as read from the config file and flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub data: DataConfig,
    pub planted: PlantedConfig,
    pub catalog: CatalogConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
    /// One training run per seed; the seed drives the split and the model.
    pub seeds: Vec<u64>,
    /// Pick the learning rate per seed from the validation accuracy over
    /// the standard grid.
    pub lr_grid: bool,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            data: DataConfig::default(),
            planted: PlantedConfig::default(),
            catalog: CatalogConfig::default(),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            seeds: vec![0],
            lr_grid: false,
            out: None,
            threads: 1,
        }
    }
}

/// Applies flat dotted-key overrides to `base`, rejecting keys that do not
/// name an existing field.
pub fn apply_overrides(base: &CliConfig, flat: &Map<String, Value>) -> Result<CliConfig> {
    let mut tree = serde_json::to_value(base)?;
    for (key, value) in flat {
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
        }
        if node.is_object() {
            return Err(Error::Config(format!("config key {key:?} names a section, not a field")));
        }
        *node = value.clone();
    }
    let cfg: CliConfig =
        serde_json::from_value(tree).map_err(|e| Error::Config(format!("bad config value: {e}")))?;
    cfg.train.validate()?;
    Ok(cfg)
}

/// Reads a flat JSON config file.
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str(&text)? {
        Value::Object(m) => Ok(m),
        _ => Err(Error::Config(format!("{}: expected a JSON object", path.display()))),
    }
}

/// Parses a `key=value` flag; the value is JSON when it parses as JSON and a
/// plain string otherwise.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key=value, got {s:?}")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// SHA-256 of the canonical JSON rendering of `cfg`.
pub fn config_hash(cfg: &CliConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(cfg)?)))
}

fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_ENV) {
        Some(root) if path.is_relative() => Path::new(&root).join(path),
        _ => path.to_path_buf(),
    }
}

fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = path
        .as_ref()
        .map(|p| resolve(p))
        .ok_or_else(|| Error::Config(format!("missing data.{what}")))?;
    if !p.exists() {
        return Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
    }
    Ok(p)
}

fn directed_set(name: &str) -> Result<DirectedSet> {
    match name {
        "full" => Ok(DirectedSet::Full),
        "acyclic5" => Ok(DirectedSet::Acyclic5),
        other => Err(Error::Config(format!("unknown directed motif set {other:?}"))),
    }
}

/// Graph plus optional raw node ids (absent for generated data).
pub struct LoadedGraph {
    pub graph: Graph,
    pub raw_ids: Vec<u64>,
}

pub fn load_graph_only(cfg: &CliConfig) -> Result<LoadedGraph> {
    let edges = require(&cfg.data.edges, "edges")?;
    let types = cfg.data.node_types.as_ref().map(|p| resolve(p));
    let (graph, ids, report) = load_graph(&edges, cfg.data.directed, types.as_deref())?;
    log::info!(
        "loaded {} nodes, {} edges ({} duplicate(s) dropped)",
        graph.n_nodes(),
        graph.n_edges(),
        report.duplicates_dropped
    );
    let raw_ids = (0..ids.len()).map(|v| ids.raw(v)).collect();
    Ok(LoadedGraph { graph, raw_ids })
}

pub fn catalog_for(cfg: &CliConfig, g: &Graph) -> Result<Catalog> {
    let base = builtin_catalog(g.is_directed(), directed_set(&cfg.catalog.directed_set)?);
    match &cfg.data.schema {
        Some(p) => {
            let schema = Schema::load(&resolve(p))?;
            typed_catalog(&schema, &base)
        }
        None => Ok(base),
    }
}

/// Loads or generates the labeled dataset for `seed`; the split is drawn
/// separately per seed.
pub fn load_dataset(cfg: &CliConfig, seed: u64) -> Result<(Dataset, Vec<u64>)> {
    let (graph, features, labels, raw_ids) = match cfg.data.source.as_str() {
        "planted" => {
            let p = planted_roles(&cfg.planted, seed)?;
            let ids = (0..p.graph.n_nodes() as u64).collect();
            (p.graph, p.features, p.labels, ids)
        }
        "files" => {
            let edges = require(&cfg.data.edges, "edges")?;
            let types = cfg.data.node_types.as_ref().map(|p| resolve(p));
            let (graph, ids, _) = load_graph(&edges, cfg.data.directed, types.as_deref())?;
            let features = match &cfg.data.features {
                Some(_) => load_features(&require(&cfg.data.features, "features")?, &ids)?,
                None => FeatureMatrix::identity(graph.n_nodes()),
            };
            let labels = load_labels(&require(&cfg.data.labels, "labels")?, &ids)?;
            let raw = (0..ids.len()).map(|v| ids.raw(v)).collect();
            (graph, features, labels, raw)
        }
        other => return Err(Error::Config(format!("unknown data.source {other:?}"))),
    };
    let split = make_splits(&labels, cfg.split.train_ratio, cfg.split.val_ratio, seed)?;
    let catalog = catalog_for(cfg, &graph)?;
    let index = build_index_threaded(&graph, &catalog, cfg.threads.max(1))?;
    Ok((
        Dataset {
            graph,
            features,
            labels,
            split,
            catalog,
            index,
        },
        raw_ids,
    ))
}

/// Output directory with a manifest of everything written into it.
pub struct OutDir {
    root: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            artifacts: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `bytes` to `name` (which may contain `/`) and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.artifacts.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Records a file written by someone else.
    pub fn record(&mut self, name: &str) -> Result<()> {
        let p = self.path(name);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        self.artifacts.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn finish(mut self, command: &str, config_hash: &str, graph_hashes: Vec<String>) -> Result<()> {
        let manifest = serde_json::json!({
            "command": command,
            "config_hash": config_hash,
            "graph_hashes": graph_hashes,
            "artifacts": self.artifacts,
        });
        let bytes = serde_json::to_vec_pretty(&manifest)?;
        let p = self.path("manifest.json");
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.artifacts.clear();
        Ok(())
    }
}

/// Motif counts of a graph: one `name: count` pair per catalog motif.
pub fn cmd_motifs(cfg: &CliConfig) -> Result<String> {
    let loaded = load_graph_only(cfg)?;
    let catalog = catalog_for(cfg, &loaded.graph)?;
    let index = build_index_threaded(&loaded.graph, &catalog, cfg.threads.max(1))?;
    let line = catalog
        .motifs()
        .iter()
        .enumerate()
        .map(|(t, m)| format!("{}: {}", m.name, index.total(t)))
        .collect::<Vec<_>>()
        .join(", ");
    if let Some(out) = &cfg.out {
        let mut dir = OutDir::create(out)?;
        let mut csv = String::from("node");
        for m in catalog.motifs() {
            csv.push(',');
            csv.push_str(&m.name);
        }
        csv.push('\n');
        for v in 0..loaded.graph.n_nodes() {
            csv.push_str(&loaded.raw_ids[v].to_string());
            for t in 0..catalog.len() {
                csv.push_str(&format!(",{}", index.count(v, t)));
            }
            csv.push('\n');
        }
        dir.write("motif_counts.csv", csv.as_bytes())?;
        dir.finish("motifs", &config_hash(cfg)?, vec![loaded.graph.content_hash()])?;
    }
    Ok(line)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub seeds: Vec<u64>,
    pub test_accuracy: Vec<f64>,
    pub summary: Summary,
}

/// Trains one model per seed and writes checkpoints, reports and timings.
pub fn cmd_train(cfg: &CliConfig) -> Result<TrainSummary> {
    let mut dir = cfg.out.as_deref().map(OutDir::create).transpose()?;
    let mut accs = Vec::new();
    let mut hashes = Vec::new();
    for &seed in &cfg.seeds {
        let (ds, _) = load_dataset(cfg, seed)?;
        let tc = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let out = if cfg.lr_grid {
            train_lr_grid(&ds.view(), &tc, &LR_GRID)?
        } else {
            train(&ds.view(), &tc)?
        };
        println!(
            "seed {seed}: test accuracy {:.4} (best epoch {}, val {:.4})",
            out.report.test_acc, out.report.best_epoch, out.report.best_val_acc
        );
        accs.push(out.report.test_acc);
        hashes.push(out.report.graph_hash.clone());
        if let Some(d) = dir.as_mut() {
            let sub = format!("seed-{seed}");
            let ckpt = format!("{sub}/model.ckpt");
            fs::create_dir_all(d.path(&sub)).map_err(|e| Error::io(d.path(&sub), e))?;
            save_checkpoint(&d.path(&ckpt), &out.report.config, &out.model, &out.rng_states)?;
            d.record(&ckpt)?;
            d.write_json(&format!("{sub}/report.json"), &out.report)?;
            d.write_json(&format!("{sub}/timings.json"), &out.timings)?;
            d.write_json(&format!("{sub}/split.json"), &ds.split)?;
        }
    }
    let summary = TrainSummary {
        seeds: cfg.seeds.clone(),
        summary: summarize(&accs),
        test_accuracy: accs,
    };
    if let Some(mut d) = dir {
        d.write_json("summary.json", &summary)?;
        hashes.dedup();
        d.finish("train", &config_hash(cfg)?, hashes)?;
    }
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub seed: u64,
    pub test_accuracy: f64,
    pub by_degree: Vec<BinRow>,
    pub by_label_fraction: Vec<BinRow>,
    pub by_attribute_diversity: Vec<BinRow>,
}

/// Reloads a checkpoint, predicts every node and writes the breakdowns.
pub fn cmd_eval(cfg: &CliConfig, checkpoint: &Path) -> Result<EvalReport> {
    let ck = load_checkpoint(checkpoint)?;
    let seed = ck.config.seed;
    let (ds, raw_ids) = load_dataset(cfg, seed)?;
    if ck.model.meta.in_dim != ds.features.n_cols() {
        return Err(Error::Config(format!(
            "checkpoint expects {} features, dataset has {}",
            ck.model.meta.in_dim,
            ds.features.n_cols()
        )));
    }
    let prop = Propagation::<f32>::new(&ds.graph);
    let x = Rc::new(ds.features.values().mapv(|v| v as f32));
    let probs = ck.model.predict(&prop, &x, !ck.config.motif_attention)?;
    let preds = argmax_rows(&probs);
    let test = &ds.split.test;
    let labels: Vec<usize> = test
        .iter()
        .map(|&v| ds.labels.get(v).map(|y| y as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::State("unlabeled test node".into()))?;
    let report = EvalReport {
        seed,
        test_accuracy: accuracy(&preds, test, &labels),
        by_degree: degree_report(&ds.graph, test, &preds, &labels, None),
        by_label_fraction: label_fraction_report(&ds.graph, &ds.split, &preds, &labels),
        by_attribute_diversity: attribute_diversity_report(&ds.graph, &ds.features, test, &preds, &labels),
    };
    if let Some(out) = &cfg.out {
        let mut d = OutDir::create(out)?;
        d.write_json("eval.json", &report)?;
        d.write("by_degree.csv", bins_csv(&report.by_degree).as_bytes())?;
        d.write("by_label_fraction.csv", bins_csv(&report.by_label_fraction).as_bytes())?;
        d.write("by_attribute_diversity.csv", bins_csv(&report.by_attribute_diversity).as_bytes())?;
        let mut csv = String::from("node,prediction\n");
        for (v, p) in preds.iter().enumerate() {
            csv.push_str(&format!("{},{p}\n", raw_ids[v]));
        }
        d.write("predictions.csv", csv.as_bytes())?;
        d.finish("eval", &config_hash(cfg)?, vec![ds.graph.content_hash()])?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub m: usize,
    pub rows: Vec<BenchRow>,
    pub overhead_fit: LinearFit,
}

/// Per-epoch timing of both variants on BA graphs of the given sizes.
pub fn cmd_bench(cfg: &CliConfig, sizes: &[usize], m: usize) -> Result<BenchReport> {
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let rows = runtime_bench(sizes, m, &cfg.train, seed)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.overhead_secs).collect();
    let report = BenchReport {
        m,
        overhead_fit: linear_fit(&xs, &ys),
        rows,
    };
    if let Some(out) = &cfg.out {
        let mut d = OutDir::create(out)?;
        d.write_json("bench.json", &report)?;
        d.finish("bench", &config_hash(cfg)?, Vec::new())?;
    }
    Ok(report)
}

/// Runs the finite-difference suite.
pub fn cmd_gradcheck(configs: usize, seed: u64, h: f64, tol: f64) -> Result<Vec<OpReport>> {
    run_suite(configs, seed, h, tol)
}

/// Exit status for an error: 2 for usage, configuration and I/O problems,
/// 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Config(_) | Error::Io { .. } | Error::Json(_) | Error::Schema(_) => 2,
        _ => 1,
    }
}
