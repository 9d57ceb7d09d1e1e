//! Finite-difference checks for every differentiable tape op and both GNN
//! layer types, run in `f64` over randomly drawn shapes and inputs.

use std::rc::Rc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{check_gradients, ParamStore, SparseMatrix, Tape, Var};
use crate::error::Result;
use crate::gnn::{Arch, BaseGnn, GnnConfig, Propagation};
use crate::graph::Graph;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

/// Worst result of one op over all its random configurations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpReport {
    pub name: String,
    pub configs: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub passed: bool,
}

type Case = fn(&mut ChaCha8Rng, f64, f64) -> Result<(f64, f64, bool)>;

const CASES: &[(&str, Case)] = &[
    ("matmul_lhs", matmul_lhs),
    ("matmul_rhs", matmul_rhs),
    ("sparse_matmul", sparse_matmul),
    ("add_broadcast", add_broadcast),
    ("sub", sub),
    ("mul", mul),
    ("mul_broadcast", mul_broadcast),
    ("scale", scale),
    ("concat_rows", concat_rows),
    ("concat_cols", concat_cols),
    ("row_softmax", row_softmax),
    ("sigmoid", sigmoid),
    ("tanh", tanh),
    ("leaky_relu", leaky_relu),
    ("elu", elu),
    ("dropout", dropout),
    ("gather_rows", gather_rows),
    ("pick_cols", pick_cols),
    ("column", column),
    ("segment_softmax", segment_softmax),
    ("aggregate_weights", aggregate_weights),
    ("aggregate_values", aggregate_values),
    ("reduce_mean", reduce_mean),
    ("row_sum", row_sum),
    ("log", log),
    ("gcn_features", gcn_features),
    ("gcn_params", gcn_params),
    ("gat_features", gat_features),
    ("gat_params", gat_params),
];

/// Names of all checked cases, in run order.
pub fn case_names() -> Vec<&'static str> {
    CASES.iter().map(|c| c.0).collect()
}

/// Runs every case `configs` times with fresh random shapes and values.
pub fn run_suite(configs: usize, seed: u64, h: f64, tol: f64) -> Result<Vec<OpReport>> {
    CASES
        .iter()
        .enumerate()
        .map(|(i, &(name, case))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut rep = OpReport {
                name: name.to_string(),
                configs,
                max_rel_err: 0.0,
                max_abs_err: 0.0,
                passed: true,
            };
            for _ in 0..configs {
                let (rel, abs, ok) = case(&mut rng, h, tol)?;
                rep.max_rel_err = rep.max_rel_err.max(rel);
                rep.max_abs_err = rep.max_abs_err.max(abs);
                rep.passed &= ok;
            }
            Ok(rep)
        })
        .collect()
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
}

/// Values bounded away from zero, for ops with a kink there.
fn off_zero(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| {
        let m = rng.gen_range(0.05..1.5);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.gen_range(1..6), rng.gen_range(1..6))
}

/// Projects an op output onto fixed random weights so every output entry
/// contributes to the scalar loss.
fn project(tape: &mut Tape<f64>, out: Var, weights: &Array2<f64>) -> Result<Var> {
    let c = tape.constant(weights.clone())?;
    let p = tape.mul(out, c)?;
    tape.reduce_sum(p)
}

fn check_op<F>(rng: &mut ChaCha8Rng, x: Array2<f64>, out_shape: (usize, usize), h: f64, tol: f64, f: F) -> Result<(f64, f64, bool)>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let w = rand_mat(rng, out_shape.0, out_shape.1);
    let r = check_gradients(
        |t, v| {
            let out = f(t, v)?;
            project(t, out, &w)
        },
        &x,
        h,
        tol,
    )?;
    Ok((r.max_rel_err, r.max_abs_err, r.passed))
}

fn matmul_lhs(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, k) = dims(rng);
    let m = rng.gen_range(1..6);
    let b = rand_mat(rng, k, m);
    let x = rand_mat(rng, n, k);
    check_op(rng, x, (n, m), h, tol, |t, v| {
        let bv = t.constant(b.clone())?;
        t.matmul(v, bv)
    })
}

fn matmul_rhs(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, k) = dims(rng);
    let m = rng.gen_range(1..6);
    let a = rand_mat(rng, n, k);
    let x = rand_mat(rng, k, m);
    check_op(rng, x, (n, m), h, tol, |t, v| {
        let av = t.constant(a.clone())?;
        t.matmul(av, v)
    })
}

fn sparse_matmul(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, k) = dims(rng);
    let m = rng.gen_range(1..6);
    let dense = Array2::from_shape_fn((n, k), |_| if rng.gen_bool(0.5) { rng.gen_range(-1.0..1.0) } else { 0.0 });
    let sp = Rc::new(SparseMatrix::from_dense(dense.view()));
    let x = rand_mat(rng, k, m);
    check_op(rng, x, (n, m), h, tol, |t, v| t.sparse_matmul(&sp, v))
}

fn add_broadcast(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    // the differentiated operand is the broadcast row
    let (n, d) = dims(rng);
    let a = rand_mat(rng, n, d);
    let x = rand_mat(rng, 1, d);
    check_op(rng, x, (n, d), h, tol, |t, v| {
        let av = t.constant(a.clone())?;
        let s = t.add(av, v)?;
        t.tanh(s)
    })
}

fn sub(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let a = rand_mat(rng, n, d);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n, d), h, tol, |t, v| {
        let av = t.constant(a.clone())?;
        let s = t.sub(av, v)?;
        t.mul(s, s)
    })
}

fn mul(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let a = rand_mat(rng, n, d);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n, d), h, tol, |t, v| {
        let av = t.constant(a.clone())?;
        let p = t.mul(av, v)?;
        t.mul(p, v)
    })
}

fn mul_broadcast(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let a = rand_mat(rng, n, d);
    let x = rand_mat(rng, n, 1);
    check_op(rng, x, (n, d), h, tol, |t, v| {
        let av = t.constant(a.clone())?;
        t.mul(av, v)
    })
}

fn scale(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let c = rng.gen_range(-3.0..3.0);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n, d), h, tol, move |t, v| t.scale(v, c))
}

fn concat_rows(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let k = rng.gen_range(1..4);
    let a = rand_mat(rng, k, d);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (2 * n + k, d), h, tol, |t, v| {
        let av = t.constant(a.clone())?;
        t.concat_rows(&[v, av, v])
    })
}

fn concat_cols(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let k = rng.gen_range(1..4);
    let a = rand_mat(rng, n, k);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n, k + 2 * d), h, tol, |t, v| {
        let av = t.constant(a.clone())?;
        t.concat_cols(&[av, v, v])
    })
}

fn row_softmax(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let x = rand_mat(rng, n, d + 1).mapv(|v| 3.0 * v);
    check_op(rng, x, (n, d + 1), h, tol, |t, v| t.row_softmax(v))
}

fn sigmoid(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let x = rand_mat(rng, n, d).mapv(|v| 4.0 * v);
    check_op(rng, x, (n, d), h, tol, |t, v| t.sigmoid(v))
}

fn tanh(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let x = rand_mat(rng, n, d).mapv(|v| 2.0 * v);
    check_op(rng, x, (n, d), h, tol, |t, v| t.tanh(v))
}

fn leaky_relu(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let slope = rng.gen_range(0.01..0.5);
    let x = off_zero(rng, n, d);
    check_op(rng, x, (n, d), h, tol, move |t, v| t.leaky_relu(v, slope))
}

fn elu(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let alpha = rng.gen_range(0.5..2.0);
    let x = off_zero(rng, n, d);
    check_op(rng, x, (n, d), h, tol, move |t, v| t.elu(v, alpha))
}

fn dropout(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    // the same seed on every evaluation keeps the mask fixed
    let (n, d) = dims(rng);
    let rate = rng.gen_range(0.1..0.7);
    let mask_seed: u64 = rng.gen();
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n, d), h, tol, move |t, v| {
        let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
        t.dropout(v, rate, true, &mut r)
    })
}

fn gather_rows(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let k = rng.gen_range(1..8);
    let idx: Rc<[usize]> = (0..k).map(|_| rng.gen_range(0..n)).collect();
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (k, d), h, tol, |t, v| t.gather_rows(v, Rc::clone(&idx)))
}

fn pick_cols(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let cols: Rc<[usize]> = (0..n).map(|_| rng.gen_range(0..d)).collect();
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n, 1), h, tol, |t, v| t.pick_cols(v, Rc::clone(&cols)))
}

fn column(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let j = rng.gen_range(0..d);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n, 1), h, tol, move |t, v| t.column(v, j))
}

fn segments(rng: &mut ChaCha8Rng) -> (Rc<[usize]>, usize) {
    let n_seg = rng.gen_range(1..5);
    let e = rng.gen_range(n_seg..n_seg + 8);
    // every segment appears at least once
    let ids: Vec<usize> = (0..e).map(|i| if i < n_seg { i } else { rng.gen_range(0..n_seg) }).collect();
    (ids.into(), n_seg)
}

fn segment_softmax(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (seg, _) = segments(rng);
    let x = rand_mat(rng, seg.len(), 1).mapv(|v| 3.0 * v);
    check_op(rng, x, (seg.len(), 1), h, tol, |t, v| t.segment_softmax(v, Rc::clone(&seg)))
}

fn aggregate_weights(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (dst, n_out) = segments(rng);
    let (n, d) = dims(rng);
    let src: Rc<[usize]> = (0..dst.len()).map(|_| rng.gen_range(0..n)).collect();
    let vals = rand_mat(rng, n, d);
    let x = rand_mat(rng, dst.len(), 1);
    check_op(rng, x, (n_out, d), h, tol, |t, v| {
        let xv = t.constant(vals.clone())?;
        t.aggregate(v, xv, Rc::clone(&src), Rc::clone(&dst), n_out)
    })
}

fn aggregate_values(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (dst, n_out) = segments(rng);
    let (n, d) = dims(rng);
    let src: Rc<[usize]> = (0..dst.len()).map(|_| rng.gen_range(0..n)).collect();
    let w = rand_mat(rng, dst.len(), 1);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n_out, d), h, tol, |t, v| {
        let wv = t.constant(w.clone())?;
        t.aggregate(wv, v, Rc::clone(&src), Rc::clone(&dst), n_out)
    })
}

fn reduce_mean(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (1, 1), h, tol, |t, v| {
        let s = t.mul(v, v)?;
        t.reduce_mean(s)
    })
}

fn row_sum(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let x = rand_mat(rng, n, d);
    check_op(rng, x, (n, 1), h, tol, |t, v| t.row_sum(v))
}

fn log(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let (n, d) = dims(rng);
    let x = rand_mat(rng, n, d).mapv(|v| 0.05 + 2.0 * v.abs());
    check_op(rng, x, (n, d), h, tol, |t, v| t.log(v, 1e-12))
}

fn random_graph(rng: &mut ChaCha8Rng) -> Result<Graph> {
    let n = rng.gen_range(3..8);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..n {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
            edges.push((a, b));
        }
    }
    Ok(Graph::from_edges(n, edges, false)?.0)
}

struct GnnCase {
    prop: Propagation<f64>,
    store: ParamStore<f64>,
    gnn: BaseGnn,
    features: Array2<f64>,
    weights: Array2<f64>,
}

fn gnn_case(rng: &mut ChaCha8Rng, arch: Arch) -> Result<GnnCase> {
    let g = random_graph(rng)?;
    let in_dim = rng.gen_range(2..5);
    let heads = rng.gen_range(1..4);
    let config = GnnConfig {
        arch,
        layers: 2,
        hidden: 2 * heads,
        heads,
        dropout: 0.0,
        out_dim: rng.gen_range(2..4),
    };
    let mut store = ParamStore::new();
    let gnn = BaseGnn::new(config.clone(), in_dim, &mut store, rng)?;
    // zero biases would hide bias gradient bugs behind symmetric inputs
    for id in store.ids().collect::<Vec<_>>() {
        if store.name(id).ends_with(".b") {
            let (r, c) = store.get(id).dim();
            store.set(id, rand_mat(rng, r, c).mapv(|v| 0.3 * v))?;
        }
    }
    Ok(GnnCase {
        features: rand_mat(rng, g.n_nodes(), in_dim),
        weights: rand_mat(rng, g.n_nodes(), config.out_dim),
        prop: Propagation::new(&g),
        store,
        gnn,
    })
}

fn gnn_loss(c: &GnnCase, tape: &mut Tape<f64>, store: &ParamStore<f64>, x: Var) -> Result<Var> {
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let h = c.gnn.forward(tape, store, &c.prop, x, false, &mut unused)?;
    project(tape, h, &c.weights)
}

fn gnn_features(rng: &mut ChaCha8Rng, arch: Arch, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let c = gnn_case(rng, arch)?;
    let r = check_gradients(|t, x| gnn_loss(&c, t, &c.store, x), &c.features, h, tol)?;
    Ok((r.max_rel_err, r.max_abs_err, r.passed))
}

/// Compares the tape's parameter gradients with central differences taken
/// entry by entry in the parameter store.
fn gnn_params(rng: &mut ChaCha8Rng, arch: Arch, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    let c = gnn_case(rng, arch)?;
    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let x = t.constant(c.features.clone())?;
        let l = gnn_loss(&c, &mut t, store, x)?;
        Ok(t.scalar(l))
    };
    let mut t = Tape::new();
    let x = t.constant(c.features.clone())?;
    let l = gnn_loss(&c, &mut t, &c.store, x)?;
    let grads = t.backward(l)?;
    let mut analytic: Vec<Array2<f64>> = c.store.ids().map(|id| Array2::zeros(c.store.get(id).dim())).collect();
    for (id, g) in grads.params() {
        analytic[id.0] += g;
    }
    let mut probe = c.store.clone();
    let (mut max_rel, mut max_abs, mut ok) = (0.0f64, 0.0f64, true);
    for id in c.store.ids() {
        for (idx, &a) in analytic[id.0].indexed_iter() {
            let orig = probe.get(id)[idx];
            probe.get_mut(id)[idx] = orig + h;
            let up = eval(&probe)?;
            probe.get_mut(id)[idx] = orig - h;
            let down = eval(&probe)?;
            probe.get_mut(id)[idx] = orig;
            let n = (up - down) / (2.0 * h);
            let abs = (a - n).abs();
            max_abs = max_abs.max(abs);
            if a.abs() < 1e-6 {
                ok &= abs < 1e-6;
            } else {
                let rel = abs / a.abs().max(n.abs());
                max_rel = max_rel.max(rel);
                ok &= rel < tol;
            }
        }
    }
    Ok((max_rel, max_abs, ok))
}

fn gcn_features(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    gnn_features(rng, Arch::Gcn, h, tol)
}

fn gat_features(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    gnn_features(rng, Arch::Gat, h, tol)
}

fn gcn_params(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    gnn_params(rng, Arch::Gcn, h, tol)
}

fn gat_params(rng: &mut ChaCha8Rng, h: f64, tol: f64) -> Result<(f64, f64, bool)> {
    gnn_params(rng, Arch::Gat, h, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_passes_a_few_configs() {
        for rep in run_suite(3, 11, DEFAULT_STEP, DEFAULT_TOL).unwrap() {
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn suite_is_deterministic() {
        assert_eq!(run_suite(2, 5, DEFAULT_STEP, DEFAULT_TOL).unwrap(), run_suite(2, 5, DEFAULT_STEP, DEFAULT_TOL).unwrap());
    }
}
