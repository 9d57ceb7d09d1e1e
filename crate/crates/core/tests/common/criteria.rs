//! One function per acceptance criterion. Each returns a verdict with a
//! short measurement so the acceptance runner can print it.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use infomotif::autodiff::{glorot, ParamStore, Tape};
use infomotif::eval::{linear_fit, q_sweep, runtime_bench, summarize};
use infomotif::gnn::{supervised_loss, Arch, BaseGnn, Classifier, GnnConfig, Propagation};
use infomotif::graph::{khop_neighborhood, make_splits, Graph};
use infomotif::motif::{build_index, builtin_catalog, DirectedSet};
use infomotif::regularizer::{draw_sample, motif_mi_loss, LocalNodes, MotifHead};
use infomotif::synth::{planted_roles, PlantedConfig};
use infomotif::trainer::{motif_attention, novelty_weights, train, Dataset, TrainConfig, Variant};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{binom, brute_instances, complete, erdos_renyi};

pub enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

impl Verdict {
    fn check(ok: bool, detail: String) -> Verdict {
        if ok {
            Verdict::Pass(detail)
        } else {
            Verdict::Fail(detail)
        }
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail(_))
    }

    pub fn line(&self, id: usize, name: &str) -> String {
        match self {
            Verdict::Pass(d) => format!("criterion {id:>2} {name}: PASS ({d})"),
            Verdict::Fail(d) => format!("criterion {id:>2} {name}: FAIL ({d})"),
            Verdict::Skip(d) => format!("criterion {id:>2} {name}: SKIP ({d})"),
        }
    }
}

pub fn motif_oracle() -> Verdict {
    let mut mismatches = Vec::new();
    let mut graphs = 0;
    for directed in [false, true] {
        let catalog = builtin_catalog(directed, DirectedSet::Full);
        for i in 0..100u64 {
            let n = 3 + (i as usize % 10);
            let p = [0.2, 0.4, 0.6][i as usize % 3];
            let seed = 1000 * directed as u64 + i;
            let g = erdos_renyi(n, p, directed, seed);
            let idx = build_index(&g, &catalog).unwrap();
            let brute = brute_instances(&g, &catalog);
            let got: BTreeMap<[usize; 3], usize> = idx.all().collect();
            let mut ok = got == brute;
            for v in 0..n {
                for t in 0..catalog.len() {
                    let want = brute.iter().filter(|(k, &m)| m == t && k.contains(&v)).count();
                    ok &= idx.count(v, t) == want;
                }
            }
            if !ok {
                mismatches.push(format!("directed={directed} seed={seed}"));
            }
            graphs += 1;
        }
    }
    Verdict::check(
        mismatches.is_empty(),
        format!("{graphs} graphs, mismatches: {mismatches:?}"),
    )
}

pub fn closed_form_counts() -> Verdict {
    let catalog = builtin_catalog(false, DirectedSet::Full);
    let tri = catalog.motifs().iter().position(|m| m.name == "triangle").unwrap();
    let wedge = catalog.motifs().iter().position(|m| m.name == "wedge").unwrap();
    let mut problems = Vec::new();
    for n in 3..=9 {
        let idx = build_index(&complete(n), &catalog).unwrap();
        if idx.total(tri) != binom(n, 3) || idx.total(wedge) != 0 {
            problems.push(format!("K_{n} totals"));
        }
        if (0..n).any(|v| idx.count(v, tri) != binom(n - 1, 2)) {
            problems.push(format!("K_{n} per node"));
        }
    }
    let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)], false).unwrap().0;
    let idx = build_index(&star, &catalog).unwrap();
    if idx.total(wedge) != 3 || idx.total(tri) != 0 {
        problems.push(format!("star has {} wedges", idx.total(wedge)));
    }
    Verdict::check(problems.is_empty(), format!("K_3..K_9 and 3-leaf star, problems: {problems:?}"))
}

pub fn gradient_fidelity() -> Verdict {
    let t = Instant::now();
    let reps = infomotif::gradcheck::run_suite(20, 2024, 1e-5, 1e-4).unwrap();
    let failed: Vec<&str> = reps.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let worst = reps.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    Verdict::check(
        failed.is_empty() && reps.iter().all(|r| r.configs >= 20),
        format!(
            "{} cases x 20 configs, worst rel err {worst:.1e}, failed {failed:?}, {:.1}s",
            reps.len(),
            t.elapsed().as_secs_f64()
        ),
    )
}

pub fn locality() -> Verdict {
    let mut worst_outside: f64 = 0.0;
    let mut graphs_with_inside_signal = 0;
    let mut outside_nodes = 0;
    let runs = 20;
    for i in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i as u64);
        let n = 40;
        let g = erdos_renyi(n, 0.05, false, 700 + i as u64);
        let arch = if i % 2 == 0 { Arch::Gcn } else { Arch::Gat };
        let cfg = GnnConfig {
            arch,
            layers: 2,
            hidden: 8,
            heads: 2,
            dropout: 0.0,
            out_dim: 6,
        };
        let mut store = ParamStore::<f64>::new();
        let gnn = BaseGnn::new(cfg, 5, &mut store, &mut rng).unwrap();
        let clf = Classifier::new(6, 3, &mut store, &mut rng);
        let labeled: Vec<usize> = (0..3).map(|_| rng.gen_range(0..n)).collect();
        let labels: Vec<usize> = (0..3).map(|_| rng.gen_range(0..3)).collect();
        let prop = Propagation::new(&g);
        let mut t = Tape::new();
        let x = t.var(glorot(n, 5, &mut rng)).unwrap();
        let h = gnn.forward(&mut t, &store, &prop, x, false, &mut rng).unwrap();
        let probs = clf.classify(&mut t, &store, h).unwrap();
        let loss = supervised_loss(&mut t, probs, &labeled, &labels, &[1.0 / 3.0; 3]).unwrap();
        let grads = t.backward(loss).unwrap();
        let gx = grads.get(x).unwrap();
        let inside = khop_neighborhood(&g, &labeled, 2);
        let mut inside_signal = false;
        for u in 0..n {
            let m = gx.row(u).iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if inside.contains(&u) {
                inside_signal |= m > 1e-12;
            } else {
                outside_nodes += 1;
                worst_outside = worst_outside.max(m);
            }
        }
        graphs_with_inside_signal += inside_signal as usize;
    }
    Verdict::check(
        worst_outside <= 1e-12 && graphs_with_inside_signal == runs && outside_nodes > 0,
        format!(
            "{runs} graphs, {outside_nodes} outside nodes, max outside |grad| {worst_outside:.1e}, inside signal in {graphs_with_inside_signal}"
        ),
    )
}

pub fn normalization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    let evals = 10_000;
    for _ in 0..evals {
        let d = rng.gen_range(1..6);
        let n = rng.gen_range(1..8);
        let scale = rng.gen_range(0.1..20.0);
        let mut store = ParamStore::<f64>::new();
        let head = MotifHead::new(0, d, &mut store, &mut rng);
        let p = store.add("p", glorot::<f64, _>(d, 1, &mut rng).mapv(|v| v * scale));
        let mut t = Tape::new();
        let h = t.constant(glorot::<f64, _>(n, d, &mut rng).mapv(|v| v * scale)).unwrap();
        let triples: Vec<[usize; 3]> = (0..rng.gen_range(1..5))
            .map(|_| [rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)])
            .collect();
        let (_, w) = head.encode(&mut t, &store, h, &triples).unwrap();
        for chunk in t.value(w).as_slice().unwrap().chunks(3) {
            worst = worst.max((chunk.iter().sum::<f64>() - 1.0).abs());
        }
        let k = rng.gen_range(1..6);
        let gated: Vec<_> = (0..k)
            .map(|_| t.constant(glorot::<f64, _>(n, d, &mut rng).mapv(|v| v * scale)).unwrap())
            .collect();
        let (alpha, _) = motif_attention(&mut t, &store, p, &gated, false).unwrap();
        let a = t.value(alpha).clone();
        for s in a.sum_axis(Axis(1)) {
            worst = worst.max((s - 1.0).abs());
        }
        let beta = novelty_weights(&a);
        worst = worst.max((beta.iter().sum::<f64>() - 1.0).abs());
    }
    Verdict::check(
        worst <= 1e-6,
        format!("{evals} evaluations of encoder, attention and novelty weights, max |sum - 1| {worst:.1e}"),
    )
}

pub fn analytic_anchors() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // frozen discriminator: W_d = 0 gives D = 0.5 for every instance
    let g = Graph::from_edges(7, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 5), (5, 6), (6, 3)], false)
        .unwrap()
        .0;
    let catalog = builtin_catalog(false, DirectedSet::Full);
    let idx = build_index(&g, &catalog).unwrap();
    let mut worst_mi: f64 = 0.0;
    for t_id in 0..catalog.len() {
        for v in 0..g.n_nodes() {
            let mut store = ParamStore::<f64>::new();
            let head = MotifHead::new(t_id, 4, &mut store, &mut rng);
            store.set(head.disc_w, Array2::zeros((4, 4))).unwrap();
            let Some(sample) = draw_sample(&g, &idx, v, t_id, 20, &mut rng).unwrap() else {
                continue;
            };
            let mut local = LocalNodes::default();
            for tr in sample.positives.iter().chain(&sample.negatives) {
                local.triple(*tr);
            }
            let hv: Array2<f64> = glorot(g.n_nodes(), 4, &mut rng);
            let mut t = Tape::new();
            let h = t.constant(hv.select(Axis(0), &local.nodes)).unwrap();
            let gated = head.gate(&mut t, &store, h).unwrap();
            let out = motif_mi_loss(&mut t, &store, &head, gated, &mut local, &[sample], &[1.0]).unwrap();
            worst_mi = worst_mi.max((out.per_anchor[0] - std::f64::consts::LN_2).abs());
        }
    }
    // zero classifier on a random base GNN: uniform over 7 classes
    let n = g.n_nodes();
    let mut store = ParamStore::<f64>::new();
    let gnn = BaseGnn::new(
        GnnConfig {
            hidden: 8,
            out_dim: 8,
            dropout: 0.0,
            ..GnnConfig::default()
        },
        3,
        &mut store,
        &mut rng,
    )
    .unwrap();
    let clf = Classifier::new(8, 7, &mut store, &mut rng);
    store.set(clf.w, Array2::zeros((8, 7))).unwrap();
    let prop = Propagation::new(&g);
    let mut t = Tape::new();
    let x = t.constant(glorot(n, 3, &mut rng)).unwrap();
    let h = gnn.forward(&mut t, &store, &prop, x, false, &mut rng).unwrap();
    let probs = clf.classify(&mut t, &store, h).unwrap();
    let mut worst_ce: f64 = 0.0;
    for v in 0..n {
        let l = supervised_loss(&mut t, probs, &[v], &[v % 7], &[1.0]).unwrap();
        worst_ce = worst_ce.max((t.scalar(l) - 7f64.ln()).abs());
    }
    Verdict::check(
        worst_mi <= 1e-9 && worst_ce <= 1e-9,
        format!("max |L_MI - ln 2| {worst_mi:.1e}, max |L_B - ln 7| {worst_ce:.1e}"),
    )
}

/// Directory holding `edges.txt`, `features.txt` and `labels.txt` for the
/// citation benchmark, from `INFOMOTIF_CORA` or `$INFOMOTIF_DATA/cora`.
fn cora_dir() -> Option<std::path::PathBuf> {
    let dir = std::env::var_os("INFOMOTIF_CORA")
        .map(std::path::PathBuf::from)
        .or_else(|| std::env::var_os("INFOMOTIF_DATA").map(|d| Path::new(&d).join("cora")))?;
    dir.join("edges.txt").exists().then_some(dir)
}

pub fn cora() -> Verdict {
    let Some(dir) = cora_dir() else {
        return Verdict::Skip("dataset not available offline; set INFOMOTIF_CORA to a directory with edges.txt, features.txt, labels.txt".into());
    };
    let bin = env!("CARGO_BIN_EXE_infomotif");
    let mut accs = [0.0, 0.0];
    for (k, variant) in ["base", "infomotif"].iter().enumerate() {
        let out = Command::new(bin)
            .args(["train", "--seed", "0,1,2,3,4"])
            .arg("--edges")
            .arg(dir.join("edges.txt"))
            .arg("--features")
            .arg(dir.join("features.txt"))
            .arg("--labels")
            .arg(dir.join("labels.txt"))
            .args(["--set", &format!("train.variant={variant}")])
            .args(["--set", "lr_grid=true"])
            .output()
            .unwrap();
        let text = String::from_utf8_lossy(&out.stdout);
        let accs_run: Vec<f64> = text
            .lines()
            .filter(|l| l.starts_with("seed "))
            .filter_map(|l| l.split("test accuracy ").nth(1))
            .filter_map(|s| s.split_whitespace().next()?.parse().ok())
            .collect();
        if !out.status.success() || accs_run.len() < 5 {
            return Verdict::Fail(format!("{variant} run failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        accs[k] = summarize(&accs_run[..5]).mean;
    }
    let (b, f) = (100.0 * accs[0], 100.0 * accs[1]);
    Verdict::check(
        (b - 82.0).abs() <= 3.0 && f - b >= 1.5,
        format!("base {b:.1}, InfoMotif {f:.1}, gain {:+.1}", f - b),
    )
}

/// Synthetic benchmark settings shared by criteria 8 and 9.
pub fn planted_setup() -> (PlantedConfig, TrainConfig, f64) {
    let gen = PlantedConfig::default();
    let mut cfg = TrainConfig {
        lr: 0.01,
        ..TrainConfig::default()
    };
    cfg.gnn.hidden = 64;
    cfg.gnn.out_dim = 64;
    (gen, cfg, 0.1)
}

pub fn planted_dataset(gen: &PlantedConfig, seed: u64, train_ratio: f64) -> Dataset {
    let p = planted_roles(gen, seed).unwrap();
    let split = make_splits(&p.labels, train_ratio, 0.1, seed).unwrap();
    let catalog = builtin_catalog(false, DirectedSet::Full);
    let index = build_index(&p.graph, &catalog).unwrap();
    Dataset {
        graph: p.graph,
        features: p.features,
        labels: p.labels,
        split,
        catalog,
        index,
    }
}

pub fn planted() -> Verdict {
    let t = Instant::now();
    let (gen, cfg, ratio) = planted_setup();
    let mut accs = [Vec::new(), Vec::new()];
    for seed in 0..5 {
        let ds = planted_dataset(&gen, seed, ratio);
        for (k, variant) in [Variant::Base, Variant::InfoMotif].into_iter().enumerate() {
            let out = train(&ds.view(), &TrainConfig { variant, seed, ..cfg.clone() }).unwrap();
            accs[k].push(out.report.test_acc);
        }
    }
    let b = 100.0 * summarize(&accs[0]).mean;
    let f = 100.0 * summarize(&accs[1]).mean;
    let secs = t.elapsed().as_secs_f64();
    Verdict::check(
        f - b >= 5.0 && secs < 300.0,
        format!("base {b:.1}, InfoMotif {f:.1}, gain {:+.1} over 5 seeds, {secs:.0}s", f - b),
    )
}

pub fn q_sensitivity() -> Verdict {
    let (gen, cfg, ratio) = planted_setup();
    let data: Vec<Dataset> = (0..5).map(|s| planted_dataset(&gen, s, ratio)).collect();
    let pairs: Vec<(u64, &Dataset)> = data.iter().enumerate().map(|(s, d)| (s as u64, d)).collect();
    let cfg = TrainConfig {
        variant: Variant::InfoMotif,
        ..cfg
    };
    let rows = q_sweep(&pairs, &cfg, &[5, 20]).unwrap();
    let (q5, q20) = (100.0 * rows[0].summary.mean, 100.0 * rows[1].summary.mean);
    Verdict::check(q20 >= q5, format!("Q=5 {q5:.1}, Q=20 {q20:.1}"))
}

pub fn linear_overhead() -> Verdict {
    let mut cfg = TrainConfig {
        variant: Variant::InfoMotif,
        max_epochs: 3,
        ..TrainConfig::default()
    };
    cfg.gnn.hidden = 16;
    cfg.gnn.out_dim = 16;
    let sizes = [1000, 2000, 4000, 8000];
    let rows = runtime_bench(&sizes, 3, &cfg, 0).unwrap();
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.overhead_secs).collect();
    let fit = linear_fit(&xs, &ys);
    let shown: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}s", r.n, r.overhead_secs)).collect();
    Verdict::check(fit.r2 >= 0.95, format!("overhead {}, R^2 {:.3}", shown.join(" "), fit.r2))
}

pub fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_infomotif");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args([
                "train",
                "--seed",
                "7",
                "--set",
                "data.source=planted",
                "--set",
                "planted.roles_per_class=30",
                "--set",
                "planted.background=60",
                "--set",
                "train.max_epochs=5",
                "--set",
                "train.gnn.hidden=16",
                "--set",
                "train.gnn.out_dim=16",
            ])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let same = |f: &str| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap();
    let ckpt = same("seed-7/model.ckpt");
    let report = same("seed-7/report.json");
    Verdict::check(ckpt && report, format!("checkpoint identical: {ckpt}, report identical: {report}"))
}
