//! Differentiable operations and their reverse rules.

use std::rc::Rc;

use ndarray::{concatenate, s, Array2, Axis, Zip};
use rand::Rng;

use super::{Op, Real, SparseMatrix, Tape, Var};
use crate::error::{Error, Result};

fn broadcast_dim(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let d = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, y) => Some(y),
        (x, 1) => Some(x),
        _ => None,
    };
    match (d(a.0, b.0), d(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::shape(op, format!("cannot broadcast {a:?} with {b:?}"))),
    }
}

/// Sums a broadcast gradient back down to `shape`.
fn reduce_to<T: Real>(g: &Array2<T>, shape: (usize, usize)) -> Array2<T> {
    let mut out = g.clone();
    if shape.0 == 1 && out.nrows() != 1 {
        out = out.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && out.ncols() != 1 {
        out = out.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    out
}

fn accumulate<T: Real>(grads: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
    match &mut grads[v.0] {
        Some(acc) => *acc += &g,
        slot => *slot = Some(g),
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Tape<T> {
    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.requires_grad(v))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let v = self.value(a).dot(self.value(b));
        let rg = self.rg(&[a, b]);
        self.push(v, Op::MatMul(a, b), rg, "matmul")
    }

    /// `sparse * b` for a constant sparse left operand.
    pub fn sparse_matmul(&mut self, sparse: &Rc<SparseMatrix<T>>, b: Var) -> Result<Var> {
        let sb = self.shape(b);
        if sparse.shape().1 != sb.0 {
            return Err(Error::shape(
                "sparse_adj_matmul",
                format!("{:?} x {sb:?}", sparse.shape()),
            ));
        }
        let v = sparse.matmul(self.value(b));
        let rg = self.rg(&[b]);
        self.push(v, Op::SparseMatMul(Rc::clone(sparse), b), rg, "sparse_adj_matmul")
    }

    /// Elementwise sum with row/column/scalar broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        broadcast_dim("add", self.shape(a), self.shape(b))?;
        let v = self.value(a) + self.value(b);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Add(a, b), rg, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        broadcast_dim("sub", self.shape(a), self.shape(b))?;
        let v = self.value(a) - self.value(b);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Sub(a, b), rg, "sub")
    }

    /// Hadamard product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        broadcast_dim("hadamard", self.shape(a), self.shape(b))?;
        let v = self.value(a) * self.value(b);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Mul(a, b), rg, "hadamard")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let c = T::of(c);
        let v = self.value(a).mapv(|x| x * c);
        let rg = self.rg(&[a]);
        self.push(v, Op::Scale(a, c), rg, "scale")
    }

    /// Stacks inputs vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat_rows", "no inputs"));
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(0), &views)
            .map_err(|e| Error::shape("concat_rows", e.to_string()))?;
        let rg = self.rg(parts);
        self.push(v, Op::ConcatRows(parts.to_vec()), rg, "concat_rows")
    }

    /// Stacks inputs horizontally.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat_cols", "no inputs"));
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(1), &views)
            .map_err(|e| Error::shape("concat_cols", e.to_string()))?;
        let rg = self.rg(parts);
        self.push(v, Op::ConcatCols(parts.to_vec()), rg, "concat_cols")
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let m = row.fold(T::neg_infinity(), |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        let rg = self.rg(&[a]);
        self.push(v, Op::RowSoftmax(a), rg, "row_softmax")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).mapv(sigmoid);
        let rg = self.rg(&[a]);
        self.push(v, Op::Sigmoid(a), rg, "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).mapv(T::tanh);
        let rg = self.rg(&[a]);
        self.push(v, Op::Tanh(a), rg, "tanh")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let s = T::of(slope);
        let v = self
            .value(a)
            .mapv(|x| if x > T::zero() { x } else { x * s });
        let rg = self.rg(&[a]);
        self.push(v, Op::LeakyRelu(a, s), rg, "leaky_relu")
    }

    pub fn elu(&mut self, a: Var, alpha: f64) -> Result<Var> {
        let al = T::of(alpha);
        let v = self
            .value(a)
            .mapv(|x| if x > T::zero() { x } else { al * (x.exp() - T::one()) });
        let rg = self.rg(&[a]);
        self.push(v, Op::Elu(a, al), rg, "elu")
    }

    /// Inverted dropout: in train mode each entry is zeroed with probability
    /// `rate` and survivors are scaled by `1 / (1 - rate)`. Identity otherwise.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
        }
        if !train || rate == 0.0 {
            return Ok(a);
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask = Array2::from_shape_fn(self.shape(a), |_| {
            if rng.gen::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        });
        let v = self.value(a) * &mask;
        let rg = self.rg(&[a]);
        self.push(v, Op::Dropout(a, mask), rg, "dropout")
    }

    /// Rows of `a` at `idx`, in order; repeats allowed.
    pub fn gather_rows(&mut self, a: Var, idx: Rc<[usize]>) -> Result<Var> {
        let n = self.shape(a).0;
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::shape("gather_rows", format!("row {bad} of {n}")));
        }
        let v = self.value(a).select(Axis(0), &idx);
        let rg = self.rg(&[a]);
        self.push(v, Op::GatherRows(a, idx), rg, "gather_rows")
    }

    /// `out[i] = a[i, cols[i]]` as an `n x 1` column.
    pub fn pick_cols(&mut self, a: Var, cols: Rc<[usize]>) -> Result<Var> {
        let (r, c) = self.shape(a);
        if cols.len() != r || cols.iter().any(|&j| j >= c) {
            return Err(Error::shape("pick_cols", format!("{} picks for {r}x{c}", cols.len())));
        }
        let av = self.value(a);
        let v = Array2::from_shape_fn((r, 1), |(i, _)| av[[i, cols[i]]]);
        let rg = self.rg(&[a]);
        self.push(v, Op::PickCols(a, cols), rg, "pick_cols")
    }

    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if j >= c {
            return Err(Error::shape("column", format!("column {j} of {r}x{c}")));
        }
        let v = self.value(a).slice(s![.., j..j + 1]).to_owned();
        let rg = self.rg(&[a]);
        self.push(v, Op::Column(a, j), rg, "column")
    }

    /// Softmax of an `e x 1` column within groups sharing `segments[i]`.
    pub fn segment_softmax(&mut self, a: Var, segments: Rc<[usize]>) -> Result<Var> {
        let (e, c) = self.shape(a);
        if c != 1 || segments.len() != e {
            return Err(Error::shape(
                "segment_softmax",
                format!("{e}x{c} values for {} segment ids", segments.len()),
            ));
        }
        let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
        let x = self.value(a);
        let mut max = vec![T::neg_infinity(); n_seg];
        for (i, &s) in segments.iter().enumerate() {
            max[s] = max[s].max(x[[i, 0]]);
        }
        let mut v = Array2::zeros((e, 1));
        let mut sum = vec![T::zero(); n_seg];
        for (i, &s) in segments.iter().enumerate() {
            let ex = (x[[i, 0]] - max[s]).exp();
            v[[i, 0]] = ex;
            sum[s] += ex;
        }
        for (i, &s) in segments.iter().enumerate() {
            v[[i, 0]] /= sum[s];
        }
        let rg = self.rg(&[a]);
        self.push(v, Op::SegmentSoftmax(a, segments), rg, "segment_softmax")
    }

    /// Weighted scatter: `out[dst[e]] += weights[e] * x[src[e]]` into an
    /// `n_out x d` matrix.
    pub fn aggregate(
        &mut self,
        weights: Var,
        x: Var,
        src: Rc<[usize]>,
        dst: Rc<[usize]>,
        n_out: usize,
    ) -> Result<Var> {
        let (e, wc) = self.shape(weights);
        let (n, d) = self.shape(x);
        if wc != 1 || src.len() != e || dst.len() != e {
            return Err(Error::shape(
                "aggregate",
                format!("weights {e}x{wc}, {} src, {} dst", src.len(), dst.len()),
            ));
        }
        if src.iter().any(|&s| s >= n) || dst.iter().any(|&t| t >= n_out) {
            return Err(Error::shape("aggregate", "edge endpoint out of range"));
        }
        let (w, xv) = (self.value(weights), self.value(x));
        let mut v = Array2::zeros((n_out, d));
        for k in 0..e {
            v.row_mut(dst[k]).scaled_add(w[[k, 0]], &xv.row(src[k]));
        }
        let rg = self.rg(&[weights, x]);
        self.push(v, Op::Aggregate { weights, x, src, dst }, rg, "aggregate")
    }

    pub fn reduce_mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::shape("reduce_mean", "empty input"));
        }
        let v = Array2::from_elem((1, 1), x.sum() / T::of(x.len() as f64));
        let rg = self.rg(&[a]);
        self.push(v, Op::ReduceMean(a), rg, "reduce_mean")
    }

    pub fn reduce_sum(&mut self, a: Var) -> Result<Var> {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(v, Op::ReduceSum(a), rg, "reduce_sum")
    }

    /// Per-row sums as an `n x 1` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let rg = self.rg(&[a]);
        self.push(v, Op::RowSum(a), rg, "row_sum")
    }

    /// Natural log with inputs clamped below at `floor`; clamped entries pass
    /// no gradient.
    pub fn log(&mut self, a: Var, floor: f64) -> Result<Var> {
        let f = T::of(floor);
        let clamped = self.value(a).iter().filter(|&&x| x < f).count();
        if clamped > 0 {
            log::debug!("log: clamped {clamped} value(s) at {floor}");
        }
        let v = self.value(a).mapv(|x| x.max(f).ln());
        let rg = self.rg(&[a]);
        self.push(v, Op::Log(a, f), rg, "log")
    }

    /// Propagates node `i`'s gradient `g` into its inputs.
    pub(super) fn backprop(&self, i: usize, g: &Array2<T>, grads: &mut [Option<Array2<T>>]) {
        let out = &self.nodes[i].value;
        let want = |v: Var| self.requires_grad(v);
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if want(*a) {
                    accumulate(grads, *a, g.dot(&self.value(*b).t()));
                }
                if want(*b) {
                    accumulate(grads, *b, self.value(*a).t().dot(g));
                }
            }
            Op::SparseMatMul(sp, b) => {
                if want(*b) {
                    accumulate(grads, *b, sp.transpose().matmul(g));
                }
            }
            Op::Add(a, b) => {
                if want(*a) {
                    accumulate(grads, *a, reduce_to(g, self.shape(*a)));
                }
                if want(*b) {
                    accumulate(grads, *b, reduce_to(g, self.shape(*b)));
                }
            }
            Op::Sub(a, b) => {
                if want(*a) {
                    accumulate(grads, *a, reduce_to(g, self.shape(*a)));
                }
                if want(*b) {
                    accumulate(grads, *b, reduce_to(&g.mapv(|x| -x), self.shape(*b)));
                }
            }
            Op::Mul(a, b) => {
                if want(*a) {
                    accumulate(grads, *a, reduce_to(&(g * self.value(*b)), self.shape(*a)));
                }
                if want(*b) {
                    accumulate(grads, *b, reduce_to(&(g * self.value(*a)), self.shape(*b)));
                }
            }
            Op::Scale(a, c) => {
                if want(*a) {
                    let c = *c;
                    accumulate(grads, *a, g.mapv(|x| x * c));
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let r = self.shape(p).0;
                    if want(p) {
                        accumulate(grads, p, g.slice(s![start..start + r, ..]).to_owned());
                    }
                    start += r;
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let c = self.shape(p).1;
                    if want(p) {
                        accumulate(grads, p, g.slice(s![.., start..start + c]).to_owned());
                    }
                    start += c;
                }
            }
            Op::RowSoftmax(a) => {
                if want(*a) {
                    let dot = (g * &**out).sum_axis(Axis(1)).insert_axis(Axis(1));
                    accumulate(grads, *a, &**out * &(g - &dot));
                }
            }
            Op::Sigmoid(a) => {
                if want(*a) {
                    let mut d = g.clone();
                    Zip::from(&mut d)
                        .and(&**out)
                        .for_each(|d, &y| *d = *d * y * (T::one() - y));
                    accumulate(grads, *a, d);
                }
            }
            Op::Tanh(a) => {
                if want(*a) {
                    let mut d = g.clone();
                    Zip::from(&mut d)
                        .and(&**out)
                        .for_each(|d, &y| *d *= T::one() - y * y);
                    accumulate(grads, *a, d);
                }
            }
            Op::LeakyRelu(a, slope) => {
                if want(*a) {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        if x <= T::zero() {
                            *d *= *slope
                        }
                    });
                    accumulate(grads, *a, d);
                }
            }
            Op::Elu(a, alpha) => {
                if want(*a) {
                    let mut d = g.clone();
                    Zip::from(&mut d)
                        .and(self.value(*a))
                        .and(&**out)
                        .for_each(|d, &x, &y| {
                            if x <= T::zero() {
                                *d *= y + *alpha
                            }
                        });
                    accumulate(grads, *a, d);
                }
            }
            Op::Dropout(a, mask) => {
                if want(*a) {
                    accumulate(grads, *a, g * mask);
                }
            }
            Op::GatherRows(a, idx) => {
                if want(*a) {
                    let mut d = Array2::zeros(self.shape(*a));
                    for (k, &r) in idx.iter().enumerate() {
                        let mut row = d.row_mut(r);
                        row += &g.row(k);
                    }
                    accumulate(grads, *a, d);
                }
            }
            Op::PickCols(a, cols) => {
                if want(*a) {
                    let mut d = Array2::zeros(self.shape(*a));
                    for (k, &c) in cols.iter().enumerate() {
                        d[[k, c]] = g[[k, 0]];
                    }
                    accumulate(grads, *a, d);
                }
            }
            Op::Column(a, j) => {
                if want(*a) {
                    let mut d = Array2::zeros(self.shape(*a));
                    d.slice_mut(s![.., *j..*j + 1]).assign(g);
                    accumulate(grads, *a, d);
                }
            }
            Op::SegmentSoftmax(a, segments) => {
                if want(*a) {
                    let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dot = vec![T::zero(); n_seg];
                    for (k, &s) in segments.iter().enumerate() {
                        dot[s] += g[[k, 0]] * out[[k, 0]];
                    }
                    let d = Array2::from_shape_fn(out.dim(), |(k, _)| {
                        out[[k, 0]] * (g[[k, 0]] - dot[segments[k]])
                    });
                    accumulate(grads, *a, d);
                }
            }
            Op::Aggregate { weights, x, src, dst } => {
                let (w, xv) = (self.value(*weights), self.value(*x));
                if want(*weights) {
                    let d = Array2::from_shape_fn((src.len(), 1), |(k, _)| {
                        g.row(dst[k]).dot(&xv.row(src[k]))
                    });
                    accumulate(grads, *weights, d);
                }
                if want(*x) {
                    let mut d = Array2::zeros(xv.dim());
                    for k in 0..src.len() {
                        d.row_mut(src[k]).scaled_add(w[[k, 0]], &g.row(dst[k]));
                    }
                    accumulate(grads, *x, d);
                }
            }
            Op::ReduceMean(a) => {
                if want(*a) {
                    let shape = self.shape(*a);
                    let c = g[[0, 0]] / T::of((shape.0 * shape.1) as f64);
                    accumulate(grads, *a, Array2::from_elem(shape, c));
                }
            }
            Op::ReduceSum(a) => {
                if want(*a) {
                    accumulate(grads, *a, Array2::from_elem(self.shape(*a), g[[0, 0]]));
                }
            }
            Op::RowSum(a) => {
                if want(*a) {
                    let shape = self.shape(*a);
                    let d = Array2::from_shape_fn(shape, |(r, _)| g[[r, 0]]);
                    accumulate(grads, *a, d);
                }
            }
            Op::Log(a, floor) => {
                if want(*a) {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        *d = if x < *floor { T::zero() } else { *d / x };
                    });
                    accumulate(grads, *a, d);
                }
            }
        }
    }
}
