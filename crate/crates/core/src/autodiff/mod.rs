//! Dense 2-D tensors with a reverse-mode tape and an Adam optimizer.
//!
//! Every value on the tape is a matrix; vectors are `1 x d` or `n x 1` and
//! scalars are `1 x 1`. Ops check shapes up front and reject non-finite
//! outputs. Training runs in `f32`; gradient checks run the same code in `f64`.

mod fd;
mod ops;
mod optim;
mod sparse;

use std::fmt;
use std::rc::Rc;

use ndarray::{Array2, NdFloat};

use crate::error::{Error, Result};

pub use fd::{check_gradients, finite_difference_grad, GradCheck};
pub use optim::{Adam, AdamConfig, ParamId, ParamStore};
pub use sparse::SparseMatrix;

pub type Tensor<T> = Array2<T>;

/// Floating point element type usable on the tape.
pub trait Real: NdFloat + Default + fmt::Display + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

pub(crate) enum Op<T: Real> {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(Rc<SparseMatrix<T>>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    RowSoftmax(Var),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, T),
    Elu(Var, T),
    Dropout(Var, Array2<T>),
    GatherRows(Var, Rc<[usize]>),
    PickCols(Var, Rc<[usize]>),
    Column(Var, usize),
    SegmentSoftmax(Var, Rc<[usize]>),
    Aggregate {
        weights: Var,
        x: Var,
        src: Rc<[usize]>,
        dst: Rc<[usize]>,
    },
    ReduceMean(Var),
    ReduceSum(Var),
    RowSum(Var),
    Log(Var, T),
}

pub(crate) struct Node<T: Real> {
    value: Rc<Array2<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Record of a forward computation.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    params: Vec<(ParamId, Var)>,
    consumed: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, requires_grad: bool, name: &'static str) -> Result<Var> {
        if value.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Tracked input; receives a gradient.
    pub fn var(&mut self, value: Array2<T>) -> Result<Var> {
        self.push(value, Op::Leaf, true, "var")
    }

    /// Untracked input.
    pub fn constant(&mut self, value: Array2<T>) -> Result<Var> {
        self.push(value, Op::Leaf, false, "constant")
    }

    /// Untracked input shared without copying.
    pub fn constant_shared(&mut self, value: Rc<Array2<T>>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Binds a stored parameter as a tracked leaf.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: store.shared(id),
            op: Op::Leaf,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.push((id, v));
        v
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[[0, 0]]
    }

    /// Reverse pass from a `1 x 1` loss. May run once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::State(
                "backward already ran on this tape; record a new forward pass".into(),
            ));
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss must be 1x1, got {:?}", self.shape(loss)),
            ));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].requires_grad {
                self.backprop(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        let params = self
            .params
            .iter()
            .filter_map(|&(id, v)| grads[v.0].as_ref().map(|g| (id, g.clone())))
            .collect();
        Ok(Gradients { grads, params })
    }
}

/// Gradients of one backward pass.
pub struct Gradients<T: Real> {
    grads: Vec<Option<Array2<T>>>,
    params: Vec<(ParamId, Array2<T>)>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a tracked node; `None` for untracked inputs or nodes the
    /// loss does not depend on.
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradients of bound parameters; a parameter bound twice appears twice.
    pub fn params(&self) -> &[(ParamId, Array2<T>)] {
        &self.params
    }

    pub fn into_params(self) -> Vec<(ParamId, Array2<T>)> {
        self.params
    }
}

/// Glorot-uniform initialization.
pub fn glorot<T: Real, R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| T::of(rng.gen_range(-limit..limit)))
}
