//! k-hop propagation through `S_k = zero(Ã^k)`.
//!
//! `Ã^k` is factored as `D^{-1/2} · A (D^{-1} A)^{k-1} · D^{-1/2}`, so every
//! intermediate product runs over the unit-weight pattern `A` and the
//! random-walk matrix `R = D^{-1} A`. On small-degree graphs this keeps
//! intermediate values exact where the symmetric form would round.
//!
//! `S_k · M` is computed as `Ã^k · M − diag(Ã^k) ∘ M` with `k` sparse-times-dense
//! passes, so `Ã^k` is never formed. Since `Ã^k` and `R^k` are similar,
//! `diag(Ã^k)_v = row_v(R^⌈k/2⌉) · col_v(R^⌊k/2⌋)`, which only touches the
//! ⌈k/2⌉-hop ball around each node.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};

/// `Ã = D^{-1/2} A D^{-1/2}` of an unweighted graph, kept together with its
/// factors. Isolated nodes have zero scale and therefore all-zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pattern: SparseMatrix,
    walk: SparseMatrix,
    inv_degree: Vec<f64>,
    inv_sqrt_degree: Vec<f64>,
    matrix: SparseMatrix,
}

impl NormalizedAdjacency {
    /// From undirected edges; each pair should appear once, self-loops are
    /// rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut triplets = Vec::with_capacity(2 * edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(Error::InvalidData(format!("self-loop at node {u}")));
            }
            triplets.push((u, v, 1.0));
            triplets.push((v, u, 1.0));
        }
        let pattern = SparseMatrix::from_triplets(n, triplets)?;
        if (0..n).any(|r| pattern.row(r).any(|(_, w)| w != 1.0)) {
            return Err(Error::InvalidData("duplicate edge".into()));
        }
        let degree: Vec<usize> = (0..n).map(|v| pattern.row_nnz(v)).collect();
        let inv_degree: Vec<f64> =
            degree.iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 }).collect();
        let inv_sqrt_degree: Vec<f64> = degree
            .iter()
            .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
            .collect();
        let matrix = scale_entries(&pattern, |u, v| inv_sqrt_degree[u] * inv_sqrt_degree[v]);
        let walk = scale_entries(&pattern, |u, _| inv_degree[u]);
        Ok(Self {
            pattern,
            walk,
            inv_degree,
            inv_sqrt_degree,
            matrix,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.pattern.row_nnz(v)
    }

    /// `Ã` itself.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// `Ã^k · m`, self contributions included.
    pub fn power_apply(&self, m: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
        if m.rows() != self.n() {
            return Err(Error::dimension("NormalizedAdjacency::power_apply", self.n(), m.rows()));
        }
        if k == 0 {
            return Ok(m.clone());
        }
        let mut w = m.clone();
        scale_rows(&mut w, &self.inv_sqrt_degree);
        w = self.pattern.mul_dense(&w)?;
        for _ in 1..k {
            scale_rows(&mut w, &self.inv_degree);
            w = self.pattern.mul_dense(&w)?;
        }
        scale_rows(&mut w, &self.inv_sqrt_degree);
        Ok(w)
    }
}

fn scale_entries(m: &SparseMatrix, f: impl Fn(usize, usize) -> f64) -> SparseMatrix {
    let triplets = (0..m.n())
        .flat_map(|r| m.row(r).map(move |(c, x)| (r, c, x)))
        .map(|(r, c, x)| (r, c, x * f(r, c)))
        .collect();
    SparseMatrix::from_triplets(m.n(), triplets).expect("rescaled entries of a valid matrix")
}

fn scale_rows(m: &mut DenseMatrix, s: &[f64]) {
    for (v, &f) in s.iter().enumerate() {
        for x in m.row_mut(v) {
            *x *= f;
        }
    }
}

/// Materializes `zero(Ã^k)` as a sparse matrix.
pub fn propagation_matrix(a: &NormalizedAdjacency, k: usize) -> Result<SparseMatrix> {
    check_hops(k)?;
    let mut power = a.pattern.clone();
    for _ in 1..k {
        power = power.mul_sparse(&a.walk)?;
    }
    let s = &a.inv_sqrt_degree;
    Ok(scale_entries(&power, |u, v| s[u] * s[v]).without_diagonal())
}

/// `S_k · signal` without materializing `Ã^k`.
pub fn propagate(a: &NormalizedAdjacency, signal: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    check_hops(k)?;
    let mut out = a.power_apply(signal, k)?;
    subtract_diagonal(&mut out, &power_diagonal(a, k), signal);
    Ok(out)
}

fn check_hops(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("hop count k must be at least 1".into()));
    }
    Ok(())
}

fn subtract_diagonal(out: &mut DenseMatrix, diag: &[f64], signal: &DenseMatrix) {
    for (v, &d) in diag.iter().enumerate() {
        if d != 0.0 {
            for (o, &s) in out.row_mut(v).iter_mut().zip(signal.row(v)) {
                *o -= d * s;
            }
        }
    }
}

/// `diag(Ã^k)`; `k = 0` gives the identity's diagonal.
pub fn power_diagonal(a: &NormalizedAdjacency, k: usize) -> Vec<f64> {
    let n = a.n();
    if k == 0 {
        return vec![1.0; n];
    }
    let left = k.div_ceil(2);
    let right = k / 2;
    let rt = a.walk.transpose();
    let mut walker = RowWalker::new(n);
    (0..n)
        .map(|v| {
            // row_v(R^left) and row_v((R^T)^right) = col_v(R^right)
            let r = walker.power_row(&a.walk, v, left);
            let c = walker.power_row(&rt, v, right);
            sorted_dot(r.iter().copied(), c.iter().copied())
        })
        .collect()
}

/// Dot product of two sparse vectors with ascending indices.
fn sorted_dot(
    a: impl Iterator<Item = (usize, f64)>,
    b: impl Iterator<Item = (usize, f64)>,
) -> f64 {
    let mut a = a.peekable();
    let mut b = b.peekable();
    let mut sum = 0.0;
    while let (Some(&(i, x)), Some(&(j, y))) = (a.peek(), b.peek()) {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => {
                a.next();
            }
            std::cmp::Ordering::Greater => {
                b.next();
            }
            std::cmp::Ordering::Equal => {
                sum += x * y;
                a.next();
                b.next();
            }
        }
    }
    sum
}

/// Scratch space for computing rows of matrix powers as sparse vectors.
struct RowWalker {
    acc: Vec<f64>,
    seen: Vec<bool>,
}

impl RowWalker {
    fn new(n: usize) -> Self {
        Self {
            acc: vec![0.0; n],
            seen: vec![false; n],
        }
    }

    /// `e_v^T · m^p` as an ascending sparse vector.
    fn power_row(&mut self, m: &SparseMatrix, v: usize, p: usize) -> Vec<(usize, f64)> {
        let mut cur = vec![(v, 1.0)];
        for _ in 0..p {
            let mut touched = Vec::new();
            for &(k, x) in &cur {
                for (c, y) in m.row(k) {
                    if !self.seen[c] {
                        self.seen[c] = true;
                        touched.push(c);
                    }
                    self.acc[c] += x * y;
                }
            }
            touched.sort_unstable();
            cur = touched
                .into_iter()
                .map(|c| {
                    let x = self.acc[c];
                    self.acc[c] = 0.0;
                    self.seen[c] = false;
                    (c, x)
                })
                .filter(|&(_, x)| x != 0.0)
                .collect();
        }
        cur
    }
}

/// Propagates one signal through hops `1..=K` incrementally, sharing the
/// sparse passes between hops.
pub struct Propagator<'a> {
    a: &'a NormalizedAdjacency,
    diagonals: Vec<Vec<f64>>,
}

impl<'a> Propagator<'a> {
    pub fn new(a: &'a NormalizedAdjacency, max_hops: usize) -> Result<Self> {
        check_hops(max_hops)?;
        let diagonals = (1..=max_hops).map(|k| power_diagonal(a, k)).collect();
        Ok(Self { a, diagonals })
    }

    pub fn max_hops(&self) -> usize {
        self.diagonals.len()
    }

    /// `[S_1 · signal, …, S_K · signal]`.
    pub fn all_hops(&self, signal: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
        if signal.rows() != self.a.n() {
            return Err(Error::dimension("Propagator::all_hops", self.a.n(), signal.rows()));
        }
        // w holds A (D^{-1} A)^{k-1} D^{-1/2} · signal
        let mut w = signal.clone();
        scale_rows(&mut w, &self.a.inv_sqrt_degree);
        let mut out = Vec::with_capacity(self.diagonals.len());
        for (i, diag) in self.diagonals.iter().enumerate() {
            if i > 0 {
                scale_rows(&mut w, &self.a.inv_degree);
            }
            w = self.a.pattern.mul_dense(&w)?;
            let mut hop = w.clone();
            scale_rows(&mut hop, &self.a.inv_sqrt_degree);
            subtract_diagonal(&mut hop, diag, signal);
            out.push(hop);
        }
        Ok(out)
    }
}
