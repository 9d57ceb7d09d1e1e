//! Multi-motif curriculum: motif attention, node-sensitive MI weighting,
//! novelty-weighted supervision and the alternating training loop.

mod checkpoint;

use std::rc::Rc;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{glorot, Adam, AdamConfig, ParamId, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::gnn::{argmax_rows, supervised_loss, BaseGnn, Classifier, GnnConfig, Propagation};
use crate::graph::{FeatureMatrix, Graph, LabelSet, NodeId, Split};
use crate::motif::{Catalog, MotifInstanceIndex};
use crate::regularizer::{draw_sample, motif_mi_loss, LocalNodes, MiBatchSample, MotifHead};
use crate::rng::{self, RngState, Stream};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain base GNN with a linear classifier.
    Base,
    /// Base GNN regularized by the motif objectives.
    InfoMotif,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub gnn: GnnConfig,
    /// Positive instances sampled per (node, motif).
    pub q: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Learn motif attention; uniform `1/T` otherwise.
    pub motif_attention: bool,
    /// Novelty-weighted supervision; uniform weights otherwise.
    pub novelty: bool,
    /// Run the MI phase; when off only the gated supervised model trains.
    pub mi_phase: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::InfoMotif,
            gnn: GnnConfig::default(),
            q: 20,
            max_epochs: 100,
            patience: 10,
            batch_size: 256,
            lr: 1e-3,
            weight_decay: 0.0,
            seed: 0,
            motif_attention: true,
            novelty: true,
            mi_phase: true,
        }
    }
}

/// The learning rates searched when none is pinned.
pub const LR_GRID: [f64; 3] = [1e-4, 1e-3, 1e-2];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.gnn.validate()?;
        if self.q == 0 || self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("q, max_epochs and batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// Base GNN, per-motif heads, motif-attention vector and class predictor.
#[derive(Clone, Debug)]
pub struct Model<T: Real> {
    pub store: ParamStore<T>,
    pub meta: ModelMeta,
}

/// Parameter layout of a [`Model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub variant: Variant,
    pub in_dim: usize,
    pub n_classes: usize,
    pub motif_names: Vec<String>,
    pub base: BaseGnn,
    pub heads: Vec<MotifHead>,
    /// Motif-attention vector `p` (`D x 1`); absent for the base variant.
    pub attention: Option<ParamId>,
    pub classifier: Classifier,
}

impl<T: Real> Model<T> {
    pub fn new<R: Rng + ?Sized>(
        config: &TrainConfig,
        in_dim: usize,
        n_classes: usize,
        catalog: &Catalog,
        rng: &mut R,
    ) -> Result<Self> {
        let mut store = ParamStore::new();
        let base = BaseGnn::new(config.gnn.clone(), in_dim, &mut store, rng)?;
        let d = config.gnn.out_dim;
        let (heads, attention, motif_names) = match config.variant {
            Variant::Base => (Vec::new(), None, Vec::new()),
            Variant::InfoMotif => {
                if catalog.is_empty() {
                    return Err(Error::Config("the motif catalog is empty".into()));
                }
                let heads = (0..catalog.len())
                    .map(|t| MotifHead::new(t, d, &mut store, rng))
                    .collect();
                let p = store.add("attention.p", glorot(d, 1, rng));
                let names = catalog.motifs().iter().map(|m| m.name.clone()).collect();
                (heads, Some(p), names)
            }
        };
        let classifier = Classifier::new(d, n_classes, &mut store, rng);
        Ok(Model {
            store,
            meta: ModelMeta {
                variant: config.variant,
                in_dim,
                n_classes,
                motif_names,
                base,
                heads,
                attention,
                classifier,
            },
        })
    }

    pub fn n_motifs(&self) -> usize {
        self.meta.heads.len()
    }

    /// Base embeddings of every node.
    pub fn embed<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        prop: &Propagation<T>,
        x: Var,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        self.meta.base.forward(tape, &self.store, prop, x, train, rng)
    }

    /// Final representations `z` of the rows of `h`, and the motif attention
    /// `alpha` (`rows x T`) when the model has motif heads.
    pub fn represent(&self, tape: &mut Tape<T>, h: Var, uniform_attention: bool) -> Result<(Var, Option<Var>)> {
        let Some(p) = self.meta.attention else {
            return Ok((h, None));
        };
        let gated = self
            .meta
            .heads
            .iter()
            .map(|head| head.gate(tape, &self.store, h))
            .collect::<Result<Vec<_>>>()?;
        let (alpha, z) = motif_attention(tape, &self.store, p, &gated, uniform_attention)?;
        Ok((z, Some(alpha)))
    }

    /// Class distribution of every node, evaluated without dropout.
    pub fn predict(&self, prop: &Propagation<T>, x: &Rc<Array2<T>>, uniform_attention: bool) -> Result<Array2<T>> {
        let mut tape = Tape::new();
        let xv = tape.constant_shared(Rc::clone(x));
        let mut unused = rng::stream(0, Stream::Dropout);
        let h = self.embed(&mut tape, prop, xv, false, &mut unused)?;
        let (z, _) = self.represent(&mut tape, h, uniform_attention)?;
        let probs = self.meta.classifier.classify(&mut tape, &self.store, z)?;
        Ok(tape.value(probs).clone())
    }

    /// Motif attention of every node in eval mode (`n x T`).
    pub fn attention_matrix(
        &self,
        prop: &Propagation<T>,
        x: &Rc<Array2<T>>,
        uniform_attention: bool,
    ) -> Result<Option<Array2<f64>>> {
        if self.meta.attention.is_none() {
            return Ok(None);
        }
        let mut tape = Tape::new();
        let xv = tape.constant_shared(Rc::clone(x));
        let mut unused = rng::stream(0, Stream::Dropout);
        let h = self.embed(&mut tape, prop, xv, false, &mut unused)?;
        let (_, alpha) = self.represent(&mut tape, h, uniform_attention)?;
        Ok(alpha.map(|a| tape.value(a).mapv(|v| v.as_f64())))
    }
}

/// `alpha_vt = softmax_t(p . h_v^t)` and `z_v = sum_t alpha_vt h_v^t`.
/// With `uniform` set the scores are ignored and `alpha = 1/T`.
pub fn motif_attention<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    p: ParamId,
    gated: &[Var],
    uniform: bool,
) -> Result<(Var, Var)> {
    if gated.is_empty() {
        return Err(Error::shape("motif_attention", "no motif embeddings"));
    }
    let rows = tape.shape(gated[0]).0;
    let alpha = if uniform {
        let t = gated.len();
        tape.constant(Array2::from_elem((rows, t), T::of(1.0 / t as f64)))?
    } else {
        let pv = tape.param(store, p);
        let scores = gated
            .iter()
            .map(|&g| tape.matmul(g, pv))
            .collect::<Result<Vec<_>>>()?;
        let scores = tape.concat_cols(&scores)?;
        tape.row_softmax(scores)?
    };
    let mut z: Option<Var> = None;
    for (t, &g) in gated.iter().enumerate() {
        let a = tape.column(alpha, t)?;
        let term = tape.mul(g, a)?;
        z = Some(match z {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    Ok((alpha, z.expect("at least one motif")))
}

/// `(1/(nT)) sum alpha_vt L^t(v)` over the contributing `(v, t, L)` terms,
/// with `n` the number of rows of `alpha`.
pub fn weighted_mi_loss(alpha: &Array2<f64>, terms: &[(NodeId, usize, f64)]) -> f64 {
    let (n, t) = alpha.dim();
    let total: f64 = terms.iter().map(|&(v, m, l)| alpha[[v, m]] * l).sum();
    total / (n * t) as f64
}

/// `beta_v = softmax_v(||alpha_v - mu||^2)` over the given rows, where `mu`
/// is their mean.
pub fn novelty_weights(alpha: &Array2<f64>) -> Vec<f64> {
    if alpha.nrows() == 0 {
        return Vec::new();
    }
    let mu = alpha.mean_axis(Axis(0)).expect("nonempty");
    let dev: Vec<f64> = alpha
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(&mu).map(|(a, m)| (a - m) * (a - m)).sum())
        .collect();
    let max = dev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = dev.iter().map(|d| (d - max).exp()).collect();
    let z: f64 = ex.iter().sum();
    ex.into_iter().map(|e| e / z).collect()
}

/// Owned inputs of a training run.
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelSet,
    pub split: Split,
    pub catalog: Catalog,
    pub index: MotifInstanceIndex,
}

impl Dataset {
    pub fn view(&self) -> TrainData<'_> {
        TrainData {
            graph: &self.graph,
            features: &self.features,
            labels: &self.labels,
            split: &self.split,
            catalog: &self.catalog,
            index: &self.index,
        }
    }
}

/// Everything a training run reads.
pub struct TrainData<'a> {
    pub graph: &'a Graph,
    pub features: &'a FeatureMatrix,
    pub labels: &'a LabelSet,
    pub split: &'a Split,
    pub catalog: &'a Catalog,
    pub index: &'a MotifInstanceIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub supervised_loss: f64,
    /// Mean weighted MI loss per batch; absent when the phase is skipped.
    pub mi_loss: Option<f64>,
    pub val_acc: f64,
    pub test_acc: f64,
    pub negative_fallbacks: usize,
}

/// Deterministic summary of one run; wall-clock figures live in [`Timings`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub graph_hash: String,
    pub n_nodes: usize,
    pub n_params: usize,
    pub motifs: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    pub stopped_early: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub epoch_secs: Vec<f64>,
    pub supervised_secs: Vec<f64>,
    pub mi_secs: Vec<f64>,
    pub total_secs: f64,
}

impl Timings {
    fn mean(v: &[f64]) -> f64 {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn mean_epoch_secs(&self) -> f64 {
        Self::mean(&self.epoch_secs)
    }

    pub fn mean_mi_secs(&self) -> f64 {
        Self::mean(&self.mi_secs)
    }

    pub fn mean_supervised_secs(&self) -> f64 {
        Self::mean(&self.supervised_secs)
    }
}

/// Trained model with its report and the final state of every RNG stream.
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub report: RunReport,
    pub timings: Timings,
    pub rng_states: Vec<(String, RngState)>,
}

fn labels_of(labels: &LabelSet, nodes: &[NodeId]) -> Result<Vec<usize>> {
    nodes
        .iter()
        .map(|&v| {
            labels
                .get(v)
                .map(|c| c as usize)
                .ok_or_else(|| Error::Config(format!("split node {v} has no label")))
        })
        .collect()
}

fn check_finite(loss: f64, epoch: usize, phase: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            epoch,
            detail: format!("{phase} loss is {loss}"),
        })
    }
}

fn diverged(epoch: usize, phase: &str, e: Error) -> Error {
    match e {
        Error::NonFinite { op } => Error::Diverged {
            epoch,
            detail: format!("non-finite value in {op} during the {phase} phase"),
        },
        other => other,
    }
}

/// Runs the alternating optimization and returns the best-validation model.
pub fn train(data: &TrainData<'_>, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let g = data.graph;
    let n = g.n_nodes();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    data.features.check_rows(n)?;
    if data.labels.n_nodes() != n {
        return Err(Error::shape("train", format!("{} labels for {n} nodes", data.labels.n_nodes())));
    }
    if data.split.train.is_empty() || data.split.val.is_empty() {
        return Err(Error::Config("train and validation sets must be nonempty".into()));
    }
    let infomotif = config.variant == Variant::InfoMotif;
    if infomotif && (data.index.n_motifs() != data.catalog.len() || data.index.n_nodes() != n) {
        return Err(Error::State("motif index does not match the graph and catalog".into()));
    }
    let started = Instant::now();

    let mut init_rng = rng::stream(config.seed, Stream::Init);
    let mut dropout_rng = rng::stream(config.seed, Stream::Dropout);
    let mut sampling_rng = rng::stream(config.seed, Stream::Sampling);
    let mut batch_rng = rng::stream(config.seed, Stream::Batching);

    let mut model = Model::<f32>::new(
        config,
        data.features.n_cols(),
        data.labels.n_classes(),
        data.catalog,
        &mut init_rng,
    )?;
    let prop = Propagation::<f32>::new(g);
    let x: Rc<Array2<f32>> = Rc::new(data.features.values().mapv(|v| v as f32));
    let uniform = !config.motif_attention;
    let n_motifs = model.n_motifs();

    let train_nodes = data.split.train.clone();
    let train_labels = labels_of(data.labels, &train_nodes)?;
    let val_labels = labels_of(data.labels, &data.split.val)?;
    let test_labels = labels_of(data.labels, &data.split.test)?;
    let label_of: std::collections::HashMap<NodeId, usize> =
        train_nodes.iter().copied().zip(train_labels.iter().copied()).collect();

    // anchors of the MI phase: every node with at least one instance
    let mi_nodes: Vec<NodeId> = if infomotif && config.mi_phase {
        (0..n)
            .filter(|&v| (0..n_motifs).any(|t| data.index.count(v, t) > 0))
            .collect()
    } else {
        Vec::new()
    };

    let adam_cfg = AdamConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..Default::default()
    };
    let mut adam_sup = Adam::<f32>::new(adam_cfg);
    let mut adam_mi = Adam::<f32>::new(adam_cfg);

    // beta starts at 1 on every training node, i.e. unweighted supervision
    let mut beta: Vec<f64> = vec![1.0 / train_nodes.len() as f64; train_nodes.len()];
    let beta_index: std::collections::HashMap<NodeId, usize> =
        train_nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let mut epochs = Vec::new();
    let mut timings = Timings::default();
    let mut best = (0usize, f64::NEG_INFINITY, 0.0f64, model.store.clone());
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 0..config.max_epochs {
        let epoch_start = Instant::now();

        // (i) supervised phase with beta fixed
        let mut order = train_nodes.clone();
        order.shuffle(&mut batch_rng);
        let mut sup_total = 0.0;
        let mut sup_batches = 0;
        for batch in order.chunks(config.batch_size) {
            let scale = train_nodes.len() as f64 / batch.len() as f64;
            let weights: Vec<f64> = batch.iter().map(|v| beta[beta_index[v]] * scale).collect();
            let labels: Vec<usize> = batch.iter().map(|v| label_of[v]).collect();
            let mut tape = Tape::new();
            let loss = (|| -> Result<(Var, f64)> {
                let xv = tape.constant_shared(Rc::clone(&x));
                let h = model.embed(&mut tape, &prop, xv, true, &mut dropout_rng)?;
                let hb = tape.gather_rows(h, Rc::from(batch))?;
                let (z, _) = model.represent(&mut tape, hb, uniform)?;
                let probs = model.meta.classifier.classify(&mut tape, &model.store, z)?;
                let rows: Vec<usize> = (0..batch.len()).collect();
                let l = supervised_loss(&mut tape, probs, &rows, &labels, &weights)?;
                let value = tape.scalar(l).as_f64();
                Ok((l, value))
            })()
            .map_err(|e| diverged(epoch, "supervised", e))?;
            check_finite(loss.1, epoch, "supervised")?;
            let grads = tape.backward(loss.0)?;
            adam_sup
                .step(&mut model.store, grads.params())
                .map_err(|e| diverged(epoch, "supervised", e))?;
            sup_total += loss.1;
            sup_batches += 1;
        }
        let sup_secs = epoch_start.elapsed().as_secs_f64();

        // (ii) alpha for all nodes, (iii) MI phase with alpha fixed
        let mi_start = Instant::now();
        let mut mi_loss = None;
        let mut fallbacks = 0;
        if !mi_nodes.is_empty() {
            let alpha = model
                .attention_matrix(&prop, &x, uniform)?
                .expect("regularized model has attention");
            let mut order = mi_nodes.clone();
            order.shuffle(&mut batch_rng);
            let mut total = 0.0;
            let mut batches = 0;
            for batch in order.chunks(config.batch_size) {
                let mut per_motif: Vec<Vec<MiBatchSample>> = vec![Vec::new(); n_motifs];
                for &v in batch {
                    for (t, bucket) in per_motif.iter_mut().enumerate() {
                        if let Some(s) = draw_sample(g, data.index, v, t, config.q, &mut sampling_rng)? {
                            fallbacks += s.fallbacks;
                            bucket.push(s);
                        }
                    }
                }
                let norm = 1.0 / (batch.len() * n_motifs) as f64;
                let mut tape = Tape::new();
                let loss = (|| -> Result<Option<Var>> {
                    let xv = tape.constant_shared(Rc::clone(&x));
                    let h = model.embed(&mut tape, &prop, xv, true, &mut dropout_rng)?;
                    let mut acc: Option<Var> = None;
                    for (t, samples) in per_motif.iter().enumerate() {
                        if samples.is_empty() {
                            continue;
                        }
                        let mut local = LocalNodes::default();
                        for s in samples {
                            for tr in s.positives.iter().chain(&s.negatives) {
                                local.triple(*tr);
                            }
                        }
                        let hl = tape.gather_rows(h, Rc::from(local.nodes.as_slice()))?;
                        let head = &model.meta.heads[t];
                        let gated = head.gate(&mut tape, &model.store, hl)?;
                        let w: Vec<f64> = samples.iter().map(|s| alpha[[s.anchor, t]] * norm).collect();
                        let out = motif_mi_loss(&mut tape, &model.store, head, gated, &mut local, samples, &w)?;
                        acc = Some(match acc {
                            None => out.loss,
                            Some(a) => tape.add(a, out.loss)?,
                        });
                    }
                    Ok(acc)
                })()
                .map_err(|e| diverged(epoch, "MI", e))?;
                let Some(loss) = loss else { continue };
                let value = tape.scalar(loss).as_f64();
                check_finite(value, epoch, "MI")?;
                let grads = tape.backward(loss)?;
                adam_mi
                    .step(&mut model.store, grads.params())
                    .map_err(|e| diverged(epoch, "MI", e))?;
                total += value;
                batches += 1;
            }
            if batches > 0 {
                mi_loss = Some(total / batches as f64);
            }
        }
        let mi_secs = mi_start.elapsed().as_secs_f64();

        // (iv) novelty weights from the refreshed attention
        if infomotif && config.novelty {
            if let Some(alpha) = model.attention_matrix(&prop, &x, uniform)? {
                beta = novelty_weights(&alpha.select(Axis(0), &train_nodes));
            }
        }

        let probs = model.predict(&prop, &x, uniform)?;
        let preds = argmax_rows(&probs);
        let val_acc = accuracy(&preds, &data.split.val, &val_labels);
        let test_acc = accuracy(&preds, &data.split.test, &test_labels);
        let supervised_loss = sup_total / sup_batches.max(1) as f64;
        log::info!(
            "epoch {epoch}: L_S {supervised_loss:.4} L_MI {} val {val_acc:.4} test {test_acc:.4}",
            mi_loss.map_or("-".to_string(), |l| format!("{l:.5}"))
        );
        epochs.push(EpochRecord {
            epoch,
            supervised_loss,
            mi_loss,
            val_acc,
            test_acc,
            negative_fallbacks: fallbacks,
        });
        timings.supervised_secs.push(sup_secs);
        timings.mi_secs.push(mi_secs);
        timings.epoch_secs.push(epoch_start.elapsed().as_secs_f64());

        if val_acc > best.1 {
            best = (epoch, val_acc, test_acc, model.store.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    model.store = best.3;
    timings.total_secs = started.elapsed().as_secs_f64();
    let report = RunReport {
        config: config.clone(),
        graph_hash: g.content_hash(),
        n_nodes: n,
        n_params: model.store.n_scalars(),
        motifs: model.meta.motif_names.clone(),
        epochs,
        best_epoch: best.0,
        best_val_acc: best.1,
        test_acc: best.2,
        stopped_early,
    };
    let rng_states = vec![
        ("init".to_string(), RngState::capture(&init_rng)),
        ("dropout".to_string(), RngState::capture(&dropout_rng)),
        ("sampling".to_string(), RngState::capture(&sampling_rng)),
        ("batching".to_string(), RngState::capture(&batch_rng)),
    ];
    Ok(TrainOutcome {
        model,
        report,
        timings,
        rng_states,
    })
}

/// Trains once per learning rate and keeps the run with the best validation
/// accuracy; earlier rates win ties.
pub fn train_lr_grid(data: &TrainData<'_>, config: &TrainConfig, grid: &[f64]) -> Result<TrainOutcome> {
    let mut best: Option<TrainOutcome> = None;
    for &lr in grid {
        let cfg = TrainConfig { lr, ..config.clone() };
        let out = train(data, &cfg)?;
        log::info!("lr {lr}: best val {:.4}", out.report.best_val_acc);
        if best.as_ref().is_none_or(|b| out.report.best_val_acc > b.report.best_val_acc) {
            best = Some(out);
        }
    }
    best.ok_or_else(|| Error::Config("empty learning-rate grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_motif_attention_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let p = store.add("p", glorot(3, 1, &mut rng));
        let mut t = Tape::new();
        let hv: Array2<f64> = glorot(4, 3, &mut rng);
        let h = t.constant(hv.clone()).unwrap();
        let (a, z) = motif_attention(&mut t, &store, p, &[h], false).unwrap();
        assert!(t.value(a).iter().all(|&x| x == 1.0));
        assert_abs_diff_eq!(t.value(z), &hv, epsilon = 1e-15);
    }

    #[test]
    fn zero_attention_vector_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::<f64>::new();
        let p = store.add("p", Array2::zeros((3, 1)));
        let mut t = Tape::new();
        let hs: Vec<Var> = (0..4)
            .map(|_| t.constant(glorot(2, 3, &mut rng)).unwrap())
            .collect();
        let (a, _) = motif_attention(&mut t, &store, p, &hs, false).unwrap();
        for &x in t.value(a) {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn attention_matches_softmax_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::<f64>::new();
        let p = store.add("p", glorot(4, 1, &mut rng));
        let hv: Vec<Array2<f64>> = (0..3).map(|_| glorot(2, 4, &mut rng)).collect();
        let mut t = Tape::new();
        let hs: Vec<Var> = hv.iter().map(|h| t.constant(h.clone()).unwrap()).collect();
        let (a, z) = motif_attention(&mut t, &store, p, &hs, false).unwrap();
        let pv = store.get(p).column(0).to_owned();
        for v in 0..2 {
            let s: Vec<f64> = hv.iter().map(|h| h.row(v).dot(&pv).exp()).collect();
            let total: f64 = s.iter().sum();
            let mut zv = ndarray::Array1::zeros(4);
            for k in 0..3 {
                assert_abs_diff_eq!(t.value(a)[[v, k]], s[k] / total, epsilon = 1e-12);
                zv.scaled_add(s[k] / total, &hv[k].row(v));
            }
            assert_abs_diff_eq!(t.value(z).row(v), zv.view(), epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_terms_give_c_over_t() {
        let alpha = Array2::from_elem((4, 2), 0.5);
        let terms: Vec<_> = (0..4).flat_map(|v| (0..2).map(move |t| (v, t, 0.7))).collect();
        assert_abs_diff_eq!(weighted_mi_loss(&alpha, &terms), 0.7 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_loss_matches_double_sum() {
        let alpha = array![[0.2, 0.8], [0.6, 0.4], [0.5, 0.5], [0.9, 0.1]];
        let l = [[1.1, 0.3], [0.2, 0.9], [0.4, 0.0], [0.7, 1.3]];
        let mut terms = Vec::new();
        let mut expect = 0.0;
        for v in 0..4 {
            for t in 0..2 {
                terms.push((v, t, l[v][t]));
                expect += alpha[[v, t]] * l[v][t];
            }
        }
        assert_abs_diff_eq!(weighted_mi_loss(&alpha, &terms), expect / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_attention_gives_uniform_novelty() {
        let alpha = Array2::from_shape_fn((5, 3), |(_, t)| [0.2, 0.3, 0.5][t]);
        for b in novelty_weights(&alpha) {
            assert_abs_diff_eq!(b, 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn outlier_gets_largest_novelty() {
        let alpha = array![[0.5, 0.5], [0.5, 0.5], [0.5, 0.5], [0.95, 0.05]];
        let b = novelty_weights(&alpha);
        assert!(b[3] > b[0] && b[0] == b[1]);
    }

    #[test]
    fn novelty_matches_direct_formula() {
        let alpha = array![[0.1, 0.9], [0.3, 0.7], [0.5, 0.5], [0.8, 0.2], [0.6, 0.4]];
        let mu = [0.46f64, 0.54];
        let d: Vec<f64> = (0..5)
            .map(|v| (alpha[[v, 0]] - mu[0]).powi(2) + (alpha[[v, 1]] - mu[1]).powi(2))
            .collect();
        let z: f64 = d.iter().map(|x| x.exp()).sum();
        for (b, di) in novelty_weights(&alpha).iter().zip(&d) {
            assert_abs_diff_eq!(*b, di.exp() / z, epsilon = 1e-12);
        }
    }
}
