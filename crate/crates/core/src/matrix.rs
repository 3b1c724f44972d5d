//! Row-major dense matrices and CSR sparse matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension(
                "DenseMatrix::from_vec",
                rows * cols,
                data.len(),
            ));
        }
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite matrix entry at row {}, column {}",
                bad / cols.max(1),
                bad % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidData(format!(
                    "ragged row {i}: expected {cols} columns, found {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// One-hot encoding of `labels`; `None` entries give all-zero rows.
    pub fn one_hot<I>(labels: I, num_classes: usize) -> Self
    where
        I: IntoIterator<Item = Option<usize>>,
        I::IntoIter: ExactSizeIterator,
    {
        let it = labels.into_iter();
        let mut m = Self::zeros(it.len(), num_classes);
        for (i, l) in it.enumerate() {
            if let Some(l) = l {
                m.data[i * num_classes + l] = 1.0;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so guard the degenerate width
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len(), self.cols);
        for (dst, &src) in idx.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Plain triple-loop product.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dimension(
                "DenseMatrix::matmul",
                format!("{} rows on the right", self.cols),
                other.rows,
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Index of the row maximum; ties go to the smallest column.
    pub fn row_argmax(&self, r: usize) -> usize {
        argmax(self.row(r))
    }
}

/// First index of the maximum value.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Square sparse matrix in compressed sparse row layout.
///
/// Column indices inside a row are strictly increasing, which fixes the
/// summation order of every product and makes results bit-stable.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
            values: Vec::new(),
            symmetric: true,
        }
    }

    /// Builds from (row, col, value) triplets. Duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::dimension("SparseMatrix::from_triplets", n, r.max(c)));
            }
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("non-finite entry at ({r}, {c})")));
            }
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            n,
            indptr,
            indices,
            values,
            symmetric: false,
        };
        m.prune_zeros();
        m.symmetric = m.is_structurally_symmetric();
        Ok(m)
    }

    fn prune_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// True when `entry(i, j) == entry(j, i)` holds exactly for all pairs.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d.set(r, c, v);
            }
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        if self.symmetric {
            return self.clone();
        }
        let triplets = (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        // entries were finite and in range on the way in
        Self::from_triplets(self.n, triplets).expect("transpose of a valid matrix")
    }

    /// `self · m` for a dense right-hand side.
    pub fn mul_dense(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.rows() != self.n {
            return Err(Error::dimension("SparseMatrix::mul_dense", self.n, m.rows()));
        }
        let cols = m.cols();
        let mut out = DenseMatrix::zeros(self.n, cols);
        for r in 0..self.n {
            let dst = out.row_mut(r);
            for (c, v) in self.row(r) {
                for (d, &x) in dst.iter_mut().zip(m.row(c)) {
                    *d += v * x;
                }
            }
        }
        Ok(out)
    }

    /// Sparse product `self · other` (Gustavson's row-by-row scheme).
    pub fn mul_sparse(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if other.n != self.n {
            return Err(Error::dimension("SparseMatrix::mul_sparse", self.n, other.n));
        }
        let mut acc = vec![0.0f64; self.n];
        let mut seen = vec![false; self.n];
        let mut touched = Vec::new();
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.n {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    indices.push(c);
                    values.push(acc[c]);
                }
                acc[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
            indptr[r + 1] = indices.len();
        }
        let mut m = SparseMatrix {
            n: self.n,
            indptr,
            indices,
            values,
            symmetric: false,
        };
        m.symmetric = m.is_structurally_symmetric();
        Ok(m)
    }

    /// Copy with every diagonal entry removed.
    pub fn without_diagonal(&self) -> SparseMatrix {
        let triplets = (0..self.n)
            .flat_map(|r| self.row(r).filter(move |&(c, _)| c != r).map(move |(c, v)| (r, c, v)))
            .collect();
        Self::from_triplets(self.n, triplets).expect("subset of a valid matrix")
    }
}

/// Row-wise dot product: `out[i] = Σ_j u[i][j] · v[i][j]`.
pub fn rowwise_dot(u: &DenseMatrix, v: &DenseMatrix) -> Result<Vec<f64>> {
    if u.shape() != v.shape() {
        return Err(Error::dimension(
            "rowwise_dot",
            format!("{:?}", u.shape()),
            format!("{:?}", v.shape()),
        ));
    }
    Ok(u.row_iter()
        .zip(v.row_iter())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
        .collect())
}
