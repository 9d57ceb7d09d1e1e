use ndarray::{Array2, ArrayView2};

use super::Real;

/// Constant CSR matrix with its transpose precomputed for the reverse pass.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
    transpose: Option<Box<SparseMatrix<T>>>,
}

impl<T: Real> SparseMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let fwd = Self::csr(n_rows, n_cols, triplets.iter().copied());
        let bwd = Self::csr(n_cols, n_rows, triplets.iter().map(|&(r, c, v)| (c, r, v)));
        SparseMatrix {
            transpose: Some(Box::new(bwd)),
            ..fwd
        }
    }

    /// Nonzero pattern of a dense matrix.
    pub fn from_dense(m: ArrayView2<'_, T>) -> Self {
        let trip: Vec<_> = m
            .indexed_iter()
            .filter(|(_, &v)| v != T::zero())
            .map(|((r, c), &v)| (r, c, v))
            .collect();
        Self::from_triplets(m.nrows(), m.ncols(), &trip)
    }

    fn csr(n_rows: usize, n_cols: usize, trip: impl Iterator<Item = (usize, usize, T)>) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n_rows];
        for (r, c, v) in trip {
            rows[r].push((c, v));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
            transpose: None,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn transpose(&self) -> &SparseMatrix<T> {
        self.transpose
            .as_deref()
            .expect("transpose is built by from_triplets")
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
    }

    /// `self * dense`
    pub fn matmul(&self, dense: &Array2<T>) -> Array2<T> {
        let mut out = Array2::zeros((self.n_rows, dense.ncols()));
        for r in 0..self.n_rows {
            let mut acc = out.row_mut(r);
            for (c, v) in self.row(r) {
                acc.scaled_add(v, &dense.row(c));
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> SparseMatrix<U> {
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            transpose: self.transpose.as_ref().map(|t| Box::new(t.cast())),
        }
    }
}
