//! Per-motif self-gating, instance encoding, readout and the bilinear
//! discriminator behind the noise-contrastive motif objective.

use std::collections::HashMap;
use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{glorot, ParamId, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::gnn::PROB_FLOOR;
use crate::graph::{Graph, NodeId};
use crate::motif::{sample_instances, sample_negative_instance, MotifInstanceIndex};

/// Parameters owned by one motif.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotifHead {
    pub gate_w: ParamId,
    pub gate_b: ParamId,
    /// Halves of the encoder attention vector: the member part and the
    /// anchor part of `a . [h_u || h_v]`.
    pub att_member: ParamId,
    pub att_anchor: ParamId,
    pub disc_w: ParamId,
}

impl MotifHead {
    pub fn new<T: Real, R: Rng + ?Sized>(t: usize, dim: usize, store: &mut ParamStore<T>, rng: &mut R) -> Self {
        MotifHead {
            gate_w: store.add(format!("motif.{t}.gate_w"), glorot(dim, dim, rng)),
            gate_b: store.add(format!("motif.{t}.gate_b"), Array2::zeros((1, dim))),
            att_member: store.add(format!("motif.{t}.att_member"), glorot(dim, 1, rng)),
            att_anchor: store.add(format!("motif.{t}.att_anchor"), glorot(dim, 1, rng)),
            disc_w: store.add(format!("motif.{t}.disc_w"), glorot(dim, dim, rng)),
        }
    }

    /// `h * sigmoid(h W + b)` row by row.
    pub fn gate<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, h: Var) -> Result<Var> {
        let w = tape.param(store, self.gate_w);
        let b = tape.param(store, self.gate_b);
        let lin = tape.matmul(h, w)?;
        let lin = tape.add(lin, b)?;
        let g = tape.sigmoid(lin)?;
        tape.mul(h, g)
    }

    /// Instance embeddings, one row per triple of row indices into `gated`.
    /// Slot 0 of each triple is the anchor. Returns the embeddings and the
    /// per-slot attention weights (`3 * n_instances` rows).
    pub fn encode<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        gated: Var,
        triples: &[[usize; 3]],
    ) -> Result<(Var, Var)> {
        if triples.is_empty() {
            return Err(Error::shape("encode_instance", "no instances"));
        }
        let a_m = tape.param(store, self.att_member);
        let a_a = tape.param(store, self.att_anchor);
        let member_score = tape.matmul(gated, a_m)?;
        let anchor_score = tape.matmul(gated, a_a)?;
        let members: Vec<usize> = triples.iter().flat_map(|t| t.iter().copied()).collect();
        let anchors: Vec<usize> = triples.iter().flat_map(|t| [t[0]; 3]).collect();
        let segments: Rc<[usize]> = (0..triples.len()).flat_map(|i| [i; 3]).collect();
        let members: Rc<[usize]> = members.into();
        let ms = tape.gather_rows(member_score, Rc::clone(&members))?;
        let an = tape.gather_rows(anchor_score, anchors.into())?;
        let logits = tape.add(ms, an)?;
        let weights = tape.segment_softmax(logits, Rc::clone(&segments))?;
        let e = tape.aggregate(weights, gated, members, segments, triples.len())?;
        Ok((e, weights))
    }

    /// `sigmoid(e^T W s_group)` for each instance row of `e`.
    pub fn discriminate<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        e: Var,
        summaries: Var,
        group_of: Rc<[usize]>,
    ) -> Result<Var> {
        let w = tape.param(store, self.disc_w);
        let ew = tape.matmul(e, w)?;
        let s = tape.gather_rows(summaries, group_of)?;
        let prod = tape.mul(ew, s)?;
        let score = tape.row_sum(prod)?;
        tape.sigmoid(score)
    }
}

/// `sigmoid(mean of the instance rows in each group)`; `group_of[i]` names
/// the group of row `i` and every group must be nonempty.
pub fn readout<T: Real>(tape: &mut Tape<T>, e: Var, group_of: &[usize], n_groups: usize) -> Result<Var> {
    let mut counts = vec![0usize; n_groups];
    for &g in group_of {
        if g >= n_groups {
            return Err(Error::shape("readout", format!("group {g} of {n_groups}")));
        }
        counts[g] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::State("readout over a group without instances".into()));
    }
    let w = Array2::from_shape_fn((group_of.len(), 1), |(i, _)| T::of(1.0 / counts[group_of[i]] as f64));
    let w = tape.constant(w)?;
    let src: Rc<[usize]> = (0..group_of.len()).collect();
    let mean = tape.aggregate(w, e, src, group_of.into(), n_groups)?;
    tape.sigmoid(mean)
}

/// Per-instance log terms: `log D` for positives, `log(1 - D)` for negatives,
/// with `D` clamped to `[1e-12, 1 - 1e-12]`.
pub fn contrastive_terms<T: Real>(tape: &mut Tape<T>, probs: Var, positive: &[bool]) -> Result<Var> {
    let n = tape.shape(probs).0;
    if positive.len() != n {
        return Err(Error::shape("motif_mi_loss", format!("{} flags for {n} scores", positive.len())));
    }
    // q = D for positives and 1 - D for negatives, as sign * D + offset
    let sign = Array2::from_shape_fn((n, 1), |(i, _)| if positive[i] { T::one() } else { -T::one() });
    let offset = Array2::from_shape_fn((n, 1), |(i, _)| if positive[i] { T::zero() } else { T::one() });
    let sign = tape.constant(sign)?;
    let offset = tape.constant(offset)?;
    let signed = tape.mul(probs, sign)?;
    let q = tape.add(signed, offset)?;
    tape.log(q, PROB_FLOOR)
}

/// One anchor's positives and matched negatives for one motif.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiBatchSample {
    pub anchor: NodeId,
    pub motif: usize,
    pub positives: Vec<[NodeId; 3]>,
    pub negatives: Vec<[NodeId; 3]>,
    /// Negatives that needed the non-neighbor fallback.
    pub fallbacks: usize,
}

/// Samples up to `q` positives and as many negatives for `(v, t)`; `None`
/// when `v` anchors no instance of `t`.
pub fn draw_sample<R: Rng + ?Sized>(
    g: &Graph,
    idx: &MotifInstanceIndex,
    v: NodeId,
    t: usize,
    q: usize,
    rng: &mut R,
) -> Result<Option<MiBatchSample>> {
    let positives: Vec<[NodeId; 3]> = sample_instances(idx, v, t, q, rng)
        .into_iter()
        .map(|i| i.nodes)
        .collect();
    if positives.is_empty() {
        return Ok(None);
    }
    let mut negatives = Vec::with_capacity(positives.len());
    let mut fallbacks = 0;
    for _ in 0..positives.len() {
        let neg = sample_negative_instance(g, idx, v, t, rng)?;
        fallbacks += neg.fallback as usize;
        negatives.push(neg.nodes);
    }
    Ok(Some(MiBatchSample {
        anchor: v,
        motif: t,
        positives,
        negatives,
        fallbacks,
    }))
}

/// Dense relabeling of the nodes touched by a set of samples.
#[derive(Debug, Default)]
pub struct LocalNodes {
    pub nodes: Vec<NodeId>,
    pos: HashMap<NodeId, usize>,
}

impl LocalNodes {
    pub fn local(&mut self, v: NodeId) -> usize {
        *self.pos.entry(v).or_insert_with(|| {
            self.nodes.push(v);
            self.nodes.len() - 1
        })
    }

    pub fn triple(&mut self, t: [NodeId; 3]) -> [usize; 3] {
        [self.local(t[0]), self.local(t[1]), self.local(t[2])]
    }
}

/// Result of evaluating one motif's objective over a batch of samples.
pub struct MotifLoss {
    /// `sum_v weight_v * L_MI^t(v)` on the tape.
    pub loss: Var,
    /// Unweighted `L_MI^t(v)` per sample, in input order.
    pub per_anchor: Vec<f64>,
}

/// Noise-contrastive loss of one motif over samples that all name it:
/// `L(v) = -1/(2Q') sum [log D(e+, s) + log(1 - D(e-, s))]`, combined as
/// `sum_v weights[v] * L(v)`. `gated` holds the motif-gated embeddings of
/// `local.nodes` in order.
pub fn motif_mi_loss<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    head: &MotifHead,
    gated: Var,
    local: &mut LocalNodes,
    samples: &[MiBatchSample],
    weights: &[f64],
) -> Result<MotifLoss> {
    if samples.len() != weights.len() {
        return Err(Error::shape("motif_mi_loss", "one weight per sample required"));
    }
    let mut triples = Vec::new();
    let mut positive = Vec::new();
    let mut group_of = Vec::new();
    let mut pos_group = Vec::new();
    let mut coef = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        if s.positives.is_empty() || s.positives.len() != s.negatives.len() {
            return Err(Error::State(format!(
                "sample for node {} has {} positives and {} negatives",
                s.anchor,
                s.positives.len(),
                s.negatives.len()
            )));
        }
        let c = 1.0 / (2.0 * s.positives.len() as f64);
        for (list, flag) in [(&s.positives, true), (&s.negatives, false)] {
            for &tr in list {
                triples.push(local.triple(tr));
                positive.push(flag);
                group_of.push(k);
                coef.push(c);
                if flag {
                    pos_group.push(k);
                }
            }
        }
    }
    if local.nodes.len() > tape.shape(gated).0 {
        return Err(Error::shape(
            "motif_mi_loss",
            "gated embeddings must cover every sampled node",
        ));
    }
    let (e, _) = head.encode(tape, store, gated, &triples)?;
    let pos_rows: Rc<[usize]> = positive
        .iter()
        .enumerate()
        .filter(|(_, &p)| p)
        .map(|(i, _)| i)
        .collect();
    let e_pos = tape.gather_rows(e, pos_rows)?;
    let s = readout(tape, e_pos, &pos_group, samples.len())?;
    let d = head.discriminate(tape, store, e, s, group_of.clone().into())?;
    let terms = contrastive_terms(tape, d, &positive)?;
    let mut per_anchor = vec![0.0; samples.len()];
    for (i, &x) in tape.value(terms).iter().enumerate() {
        per_anchor[group_of[i]] -= coef[i] * x.as_f64();
    }
    let w = Array2::from_shape_fn((triples.len(), 1), |(i, _)| T::of(-coef[i] * weights[group_of[i]]));
    let w = tape.constant(w)?;
    let weighted = tape.mul(terms, w)?;
    let loss = tape.reduce_sum(weighted)?;
    Ok(MotifLoss { loss, per_anchor })
}
