//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use labelaudit::base::SoftmaxMatrix;
use labelaudit::graph::{Graph, Split};
use labelaudit::matrix::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with every node labelled and in the train split.
pub fn random_graph(r: &mut impl Rng, n: usize, p_edge: f64, c: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random_bool(p_edge) {
                edges.push((u, v));
            }
        }
    }
    let labels = (0..n).map(|_| Some(r.random_range(0..c))).collect();
    Graph::new(c, edges, labels, vec![Split::Train; n], None).unwrap().0
}

pub fn random_dense(r: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_softmax(r: &mut impl Rng, n: usize, c: usize) -> SoftmaxMatrix {
    let mut data = Vec::with_capacity(n * c);
    for _ in 0..n {
        let row: Vec<f64> = (0..c).map(|_| r.random_range(0.01..1.0)).collect();
        let s: f64 = row.iter().sum();
        data.extend(row.into_iter().map(|x| x / s));
    }
    SoftmaxMatrix::new(DenseMatrix::from_vec(n, c, data).unwrap()).unwrap()
}

pub type Dense = Vec<Vec<f64>>;

/// `D^{-1/2} A D^{-1/2}` built directly from the edge list.
pub fn dense_normalized(g: &Graph) -> Dense {
    let n = g.num_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for u in 0..n {
        for v in 0..n {
            if a[u][v] != 0.0 {
                a[u][v] /= (deg[u] * deg[v]).sqrt();
            }
        }
    }
    a
}

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

pub fn dense_power(a: &Dense, k: usize) -> Dense {
    let n = a.len();
    let mut out: Dense = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _ in 0..k {
        out = dense_mul(&out, a);
    }
    out
}

/// `zero(Ã^k) · m` by brute force.
pub fn oracle_propagate(g: &Graph, m: &DenseMatrix, k: usize) -> Dense {
    let mut s = dense_power(&dense_normalized(g), k);
    for (i, row) in s.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    dense_mul(&s, &rows_of(m))
}

pub fn rows_of(m: &DenseMatrix) -> Dense {
    m.row_iter().map(|r| r.to_vec()).collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Norm-wise relative error between an analytic gradient and central
/// finite differences of `f` at `x`.
pub fn gradient_error(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64], h: f64) -> f64 {
    let mut numeric = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        numeric[i] = (up - down) / (2.0 * h);
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}
