//! Base message-passing encoders and the supervised classification head.

use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{glorot, ParamId, ParamStore, Real, SparseMatrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Lower bound applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Gat,
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Arch::Gcn),
            "gat" => Ok(Arch::Gat),
            _ => Err(Error::Config(format!("unknown architecture `{s}` (gcn|gat)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnnConfig {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub dropout: f64,
    /// Width of the final embedding.
    pub out_dim: usize,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            arch: Arch::Gcn,
            layers: 2,
            hidden: 256,
            heads: 8,
            dropout: 0.5,
            out_dim: 256,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.heads == 0 || self.out_dim == 0 {
            return Err(Error::Config("layers, hidden, heads and out_dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.arch == Arch::Gat && self.layers > 1 && !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden width {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        Ok(())
    }
}

/// `D^-1/2 (A + I) D^-1/2` over the symmetrized adjacency.
pub fn normalize_adjacency(g: &Graph) -> SparseMatrix<f64> {
    let n = g.n_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut trip = Vec::with_capacity(n + 2 * g.n_edges());
    for v in 0..n {
        trip.push((v, v, inv_sqrt[v] * inv_sqrt[v]));
        for &u in g.neighbors(v) {
            let u = u as usize;
            trip.push((v, u, inv_sqrt[v] * inv_sqrt[u]));
        }
    }
    SparseMatrix::from_triplets(n, n, &trip)
}

/// Graph structure in the form the layers consume.
pub struct Propagation<T: Real> {
    n_nodes: usize,
    adj: Rc<SparseMatrix<T>>,
    /// Attention edges `src -> dst` over neighbors plus self-loops.
    src: Rc<[usize]>,
    dst: Rc<[usize]>,
}

impl<T: Real> Propagation<T> {
    pub fn new(g: &Graph) -> Self {
        let mut src = Vec::with_capacity(g.n_nodes() + 2 * g.n_edges());
        let mut dst = Vec::with_capacity(src.capacity());
        for v in 0..g.n_nodes() {
            src.push(v);
            dst.push(v);
            for &u in g.neighbors(v) {
                src.push(u as usize);
                dst.push(v);
            }
        }
        Propagation {
            n_nodes: g.n_nodes(),
            adj: Rc::new(normalize_adjacency(g).cast()),
            src: src.into(),
            dst: dst.into(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn adjacency(&self) -> &SparseMatrix<T> {
        &self.adj
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GatHead {
    w: ParamId,
    a_src: ParamId,
    a_dst: ParamId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Layer {
    Gcn { w: ParamId, b: ParamId },
    Gat { heads: Vec<GatHead>, b: ParamId, concat: bool },
}

/// Stacked GCN or GAT layers producing one embedding per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseGnn {
    config: GnnConfig,
    layers: Vec<Layer>,
}

impl BaseGnn {
    /// Registers freshly initialized parameters in `store`.
    pub fn new<T: Real, R: Rng + ?Sized>(
        config: GnnConfig,
        in_dim: usize,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.layers);
        let mut width = in_dim;
        for l in 0..config.layers {
            let last = l + 1 == config.layers;
            let out = if last { config.out_dim } else { config.hidden };
            let layer = match config.arch {
                Arch::Gcn => {
                    let w = store.add(format!("gnn.{l}.w"), glorot(width, out, rng));
                    let b = store.add(format!("gnn.{l}.b"), Array2::zeros((1, out)));
                    Layer::Gcn { w, b }
                }
                Arch::Gat => {
                    // hidden layers split their width over concatenated heads,
                    // the output layer averages full-width heads
                    let head_dim = if last { out } else { out / config.heads };
                    let heads = (0..config.heads)
                        .map(|k| GatHead {
                            w: store.add(format!("gnn.{l}.h{k}.w"), glorot(width, head_dim, rng)),
                            a_src: store.add(format!("gnn.{l}.h{k}.a_src"), glorot(head_dim, 1, rng)),
                            a_dst: store.add(format!("gnn.{l}.h{k}.a_dst"), glorot(head_dim, 1, rng)),
                        })
                        .collect();
                    let b = store.add(format!("gnn.{l}.b"), Array2::zeros((1, out)));
                    Layer::Gat { heads, b, concat: !last }
                }
            };
            layers.push(layer);
            width = out;
        }
        Ok(BaseGnn { config, layers })
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    /// Embeddings `H` for every node. Dropout hits each layer's input when
    /// `train` is set.
    pub fn forward<T: Real, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        prop: &Propagation<T>,
        x: Var,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if tape.shape(x).0 != prop.n_nodes {
            return Err(Error::shape(
                "base_forward",
                format!("{} feature rows for {} nodes", tape.shape(x).0, prop.n_nodes),
            ));
        }
        let mut h = x;
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let last = l + 1 == n_layers;
            let input = tape.dropout(h, self.config.dropout, train, rng)?;
            h = match layer {
                Layer::Gcn { w, b } => {
                    let wv = tape.param(store, *w);
                    let bv = tape.param(store, *b);
                    let xw = tape.matmul(input, wv)?;
                    let agg = tape.sparse_matmul(&prop.adj, xw)?;
                    let out = tape.add(agg, bv)?;
                    if last {
                        out
                    } else {
                        tape.tanh(out)?
                    }
                }
                Layer::Gat { heads, b, concat } => {
                    let mut outs = Vec::with_capacity(heads.len());
                    for head in heads {
                        outs.push(gat_head(tape, store, prop, input, head)?);
                    }
                    let bv = tape.param(store, *b);
                    let merged = if *concat {
                        tape.concat_cols(&outs)?
                    } else {
                        let mut acc = outs[0];
                        for &o in &outs[1..] {
                            acc = tape.add(acc, o)?;
                        }
                        tape.scale(acc, 1.0 / outs.len() as f64)?
                    };
                    let out = tape.add(merged, bv)?;
                    if last {
                        out
                    } else {
                        tape.elu(out, 1.0)?
                    }
                }
            };
        }
        Ok(h)
    }
}

fn gat_head<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    prop: &Propagation<T>,
    input: Var,
    head: &GatHead,
) -> Result<Var> {
    let w = tape.param(store, head.w);
    let a_src = tape.param(store, head.a_src);
    let a_dst = tape.param(store, head.a_dst);
    let wh = tape.matmul(input, w)?;
    let f_src = tape.matmul(wh, a_src)?;
    let f_dst = tape.matmul(wh, a_dst)?;
    let e_src = tape.gather_rows(f_src, Rc::clone(&prop.src))?;
    let e_dst = tape.gather_rows(f_dst, Rc::clone(&prop.dst))?;
    let logits = tape.add(e_src, e_dst)?;
    let logits = tape.leaky_relu(logits, 0.2)?;
    let att = tape.segment_softmax(logits, Rc::clone(&prop.dst))?;
    tape.aggregate(att, wh, Rc::clone(&prop.src), Rc::clone(&prop.dst), prop.n_nodes)
}

/// Linear class predictor `softmax(Z W_c + b_c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub w: ParamId,
    pub b: ParamId,
}

impl Classifier {
    pub fn new<T: Real, R: Rng + ?Sized>(
        in_dim: usize,
        n_classes: usize,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Self {
        Classifier {
            w: store.add("classifier.w", glorot(in_dim, n_classes, rng)),
            b: store.add("classifier.b", Array2::zeros((1, n_classes))),
        }
    }

    /// Row-stochastic class probabilities.
    pub fn classify<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, z: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let logits = tape.matmul(z, w)?;
        let logits = tape.add(logits, b)?;
        tape.row_softmax(logits)
    }
}

/// Argmax per row; ties go to the lowest class index.
pub fn argmax_rows<T: Real>(probs: &Array2<T>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// `-sum_v weight_v * log probs[v, label_v]` over the given nodes.
pub fn supervised_loss<T: Real>(
    tape: &mut Tape<T>,
    probs: Var,
    nodes: &[usize],
    labels: &[usize],
    weights: &[f64],
) -> Result<Var> {
    if nodes.len() != labels.len() || nodes.len() != weights.len() {
        return Err(Error::shape(
            "supervised_loss",
            format!("{} nodes, {} labels, {} weights", nodes.len(), labels.len(), weights.len()),
        ));
    }
    let rows = tape.gather_rows(probs, Rc::from(nodes))?;
    let picked = tape.pick_cols(rows, Rc::from(labels))?;
    let logp = tape.log(picked, PROB_FLOOR)?;
    let w = Array2::from_shape_fn((weights.len(), 1), |(i, _)| T::of(-weights[i]));
    let w = tape.constant(w)?;
    let weighted = tape.mul(logp, w)?;
    tape.reduce_sum(weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn isolated_node_keeps_its_self_loop() {
        let g = Graph::from_edges(1, [], false).unwrap().0;
        assert_eq!(normalize_adjacency(&g).to_dense(), array![[1.0]]);
    }

    #[test]
    fn single_edge_gives_halves() {
        let g = Graph::from_edges(2, [(0, 1)], false).unwrap().0;
        let a = normalize_adjacency(&g).to_dense();
        assert_abs_diff_eq!(a, array![[0.5, 0.5], [0.5, 0.5]], epsilon = 1e-15);
    }

    #[test]
    fn path_matches_dense_formula() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)], false).unwrap().0;
        let a_tilde = array![[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]];
        assert_eq!(a_tilde.sum_axis(ndarray::Axis(1)), array![2.0, 3.0, 2.0]);
        let d = array![2.0f64, 3.0, 2.0].mapv(|x| 1.0 / x.sqrt());
        let expect = Array2::from_shape_fn((3, 3), |(i, j)| d[i] * a_tilde[[i, j]] * d[j]);
        assert_abs_diff_eq!(normalize_adjacency(&g).to_dense(), expect, epsilon = 1e-15);
    }

    #[test]
    fn directed_input_is_symmetrized() {
        let g = Graph::from_edges(2, [(0, 1)], true).unwrap().0;
        let a = normalize_adjacency(&g).to_dense();
        assert_eq!(a[[1, 0]], a[[0, 1]]);
    }

    fn one_layer_gcn(store: &mut ParamStore<f64>, out: usize, in_dim: usize) -> BaseGnn {
        let cfg = GnnConfig {
            layers: 1,
            out_dim: out,
            dropout: 0.0,
            ..Default::default()
        };
        BaseGnn::new(cfg, in_dim, store, &mut rng()).unwrap()
    }

    #[test]
    fn linear_gcn_on_triangle_reproduces_adjacency() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (2, 0)], false).unwrap().0;
        let mut store = ParamStore::new();
        let gnn = one_layer_gcn(&mut store, 3, 3);
        store.set(ParamId(0), Array2::eye(3)).unwrap();
        let prop = Propagation::new(&g);
        let mut t = Tape::new();
        let x = t.constant(Array2::eye(3)).unwrap();
        let h = gnn.forward(&mut t, &store, &prop, x, false, &mut rng()).unwrap();
        assert_abs_diff_eq!(t.value(h), &normalize_adjacency(&g).to_dense(), epsilon = 1e-15);
    }

    #[test]
    fn gat_with_identical_features_attends_uniformly() {
        // each node of a 4-star sees itself and its neighbors; equal inputs
        // make every logit equal, so outputs equal Wh of any node
        let g = Graph::from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)], false).unwrap().0;
        let cfg = GnnConfig {
            arch: Arch::Gat,
            layers: 1,
            heads: 2,
            out_dim: 3,
            dropout: 0.0,
            ..Default::default()
        };
        let mut store = ParamStore::<f64>::new();
        let gnn = BaseGnn::new(cfg, 4, &mut store, &mut rng()).unwrap();
        let prop = Propagation::new(&g);
        let mut t = Tape::new();
        let row = array![[0.3, -0.2, 0.7, 0.1]];
        let x = t.constant(Array2::from_shape_fn((5, 4), |(_, j)| row[[0, j]])).unwrap();
        let h = gnn.forward(&mut t, &store, &prop, x, false, &mut rng()).unwrap();
        let hv = t.value(h);
        for v in 1..5 {
            assert_abs_diff_eq!(hv.row(v), hv.row(0), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_layer_gcn_matches_dense_oracle() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)];
        let g = Graph::from_edges(6, edges, false).unwrap().0;
        let cfg = GnnConfig {
            layers: 2,
            hidden: 4,
            out_dim: 3,
            dropout: 0.0,
            ..Default::default()
        };
        let mut store = ParamStore::<f64>::new();
        let gnn = BaseGnn::new(cfg, 5, &mut store, &mut rng()).unwrap();
        let mut r = rng();
        let xv: Array2<f64> = glorot(6, 5, &mut r);
        let prop = Propagation::new(&g);
        let mut t = Tape::new();
        let x = t.constant(xv.clone()).unwrap();
        let h = gnn.forward(&mut t, &store, &prop, x, false, &mut r).unwrap();
        let a = normalize_adjacency(&g).to_dense();
        let w1 = store.get(ParamId(0));
        let w2 = store.get(ParamId(2));
        let expect = a.dot(&a.dot(&xv.dot(w1)).mapv(f64::tanh)).dot(w2);
        assert_abs_diff_eq!(t.value(h), &expect, epsilon = 1e-12);
    }

    #[test]
    fn gat_hidden_width_must_split_over_heads() {
        let cfg = GnnConfig {
            arch: Arch::Gat,
            hidden: 10,
            heads: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn perfect_predictions_have_zero_loss() {
        let mut t = Tape::<f64>::new();
        let p = t.constant(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let l = supervised_loss(&mut t, p, &[0, 1], &[0, 1], &[1.0, 1.0]).unwrap();
        assert_eq!(t.scalar(l), 0.0);
    }

    #[test]
    fn uniform_seven_classes_cost_ln7() {
        let mut t = Tape::<f64>::new();
        let p = t.constant(Array2::from_elem((1, 7), 1.0 / 7.0)).unwrap();
        let l = supervised_loss(&mut t, p, &[0], &[3], &[1.0]).unwrap();
        assert_abs_diff_eq!(t.scalar(l), 7f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn weighted_loss_matches_hand_sum() {
        let mut r = rng();
        let raw: Array2<f64> = Array2::from_shape_fn((5, 3), |_| r.gen_range(0.05..1.0));
        let probs = &raw / &raw.sum_axis(ndarray::Axis(1)).insert_axis(ndarray::Axis(1));
        let labels = [2, 0, 1, 1, 0];
        let w = [0.1, 0.3, 0.2, 0.25, 0.15];
        let expect: f64 = (0..5).map(|i| -w[i] * probs[[i, labels[i]]].ln()).sum();
        let mut t = Tape::<f64>::new();
        let p = t.constant(probs).unwrap();
        let l = supervised_loss(&mut t, p, &[0, 1, 2, 3, 4], &labels, &w).unwrap();
        assert_abs_diff_eq!(t.scalar(l), expect, epsilon = 1e-9);
    }

    #[test]
    fn argmax_ties_pick_lowest_class() {
        assert_eq!(argmax_rows(&array![[0.4, 0.4, 0.2], [0.1, 0.2, 0.7]]), vec![0, 2]);
    }
}
