use ndarray::Array2;

use super::{Tape, Var};
use crate::error::Result;

/// Central differences of a scalar function at `x`.
pub fn finite_difference_grad<F>(f: F, x: &Array2<f64>, h: f64) -> Result<Array2<f64>>
where
    F: Fn(&Array2<f64>) -> Result<f64>,
{
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for (idx, g) in grad.indexed_iter_mut() {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = f(&probe)?;
        probe[idx] = orig - h;
        let down = f(&probe)?;
        probe[idx] = orig;
        *g = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Outcome of comparing tape gradients with central differences.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub n_checked: usize,
    pub passed: bool,
}

/// Coordinates whose analytic gradient is smaller than this are compared
/// by absolute error.
const SMALL: f64 = 1e-6;

/// Builds `loss = build(tape, x)` in `f64`, differentiates it and compares
/// with central differences of step `h`. Relative error must stay below
/// `tol`; tiny coordinates use an absolute bound of [`SMALL`].
pub fn check_gradients<F>(build: F, x: &Array2<f64>, h: f64, tol: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let eval = |xv: &Array2<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.var(xv.clone())?;
        let l = build(&mut t, v)?;
        Ok(t.scalar(l))
    };
    let mut t = Tape::new();
    let v = t.var(x.clone())?;
    let loss = build(&mut t, v)?;
    let grads = t.backward(loss)?;
    let analytic = grads
        .get(v)
        .cloned()
        .unwrap_or_else(|| Array2::zeros(x.dim()));
    let numeric = finite_difference_grad(eval, x, h)?;
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut passed = true;
    for (&a, &n) in analytic.iter().zip(&numeric) {
        let abs = (a - n).abs();
        max_abs = max_abs.max(abs);
        if a.abs() < SMALL {
            passed &= abs < SMALL;
        } else {
            let rel = abs / a.abs().max(n.abs());
            max_rel = max_rel.max(rel);
            passed &= rel < tol;
        }
    }
    Ok(GradCheck {
        max_rel_err: max_rel,
        max_abs_err: max_abs,
        n_checked: x.len(),
        passed,
    })
}
