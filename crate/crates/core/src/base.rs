//! Base classifier: the row-stochastic prediction matrix `P`.
//!
//! `P` either comes from an external CSV or from the built-in model, a
//! multinomial logistic regression on propagated features `Ã^k X` trained
//! on the training split only.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph, Split};
use crate::matrix::{argmax, DenseMatrix};
use crate::propagation::NormalizedAdjacency;

/// Row-sum tolerance for externally supplied probabilities.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;
const RENORMALIZE_ABOVE: f64 = 1e-12;

/// `n × c` matrix whose rows are probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxMatrix(DenseMatrix);

impl SoftmaxMatrix {
    /// Checks entries are in `[0, 1]` and each row sums to one within
    /// [`ROW_SUM_TOLERANCE`]; rows off by more than roundoff are
    /// renormalized, so a saved matrix reloads unchanged.
    pub fn new(mut m: DenseMatrix) -> Result<Self> {
        for r in 0..m.rows() {
            let row = m.row_mut(r);
            if let Some(c) = row.iter().position(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::InvalidData(format!(
                    "row {r}: negative or non-finite probability {} in column {c}",
                    row[c]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidData(format!(
                    "row {r}: probabilities sum to {sum}, outside 1 ± {ROW_SUM_TOLERANCE}"
                )));
            }
            if (sum - 1.0).abs() > RENORMALIZE_ABOVE {
                row.iter_mut().for_each(|x| *x /= sum);
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn num_nodes(&self) -> usize {
        self.0.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, v: usize) -> &[f64] {
        self.0.row(v)
    }

    /// Most probable class of node `v`, ties to the smallest id.
    pub fn argmax(&self, v: usize) -> usize {
        argmax(self.0.row(v))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.0.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Reads an `n × c` probability CSV (no header, node-id order).
pub fn load_softmax(path: &Path, n: usize, c: usize) -> Result<SoftmaxMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::with_capacity(n * c);
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let cells = cells.map_err(|_| Error::parse(path, i + 1, "unparseable probability"))?;
        if cells.len() != c {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {c} columns, found {}", cells.len()),
            ));
        }
        rows += 1;
        if rows > n {
            return Err(Error::parse(path, i + 1, format!("more than {n} rows")));
        }
        data.extend(cells);
    }
    if rows != n {
        return Err(Error::parse(path, 0, format!("expected {n} rows, found {rows}")));
    }
    let m = DenseMatrix::from_vec(n, c, data)?;
    SoftmaxMatrix::new(m).map_err(|e| match e {
        Error::InvalidData(msg) => Error::parse(path, 0, msg),
        e => e,
    })
}

/// Numerically stable in-place softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseConfig {
    /// Hops of feature smoothing, `X' = Ã^k X`.
    pub k_base: usize,
    pub epochs: usize,
    pub step: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self {
            k_base: 2,
            epochs: 300,
            step: 0.1,
            momentum: 0.9,
            seed: 0,
        }
    }
}

/// Linear softmax model over smoothed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub version: u32,
    /// `d × c`, row-major.
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub config: BaseConfig,
}

pub const LINEAR_MODEL_VERSION: u32 = 1;

impl LinearModel {
    pub fn zeros(d: usize, c: usize, config: BaseConfig) -> Self {
        Self {
            version: LINEAR_MODEL_VERSION,
            weights: DenseMatrix::zeros(d, c),
            bias: vec![0.0; c],
            config,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    /// Class probabilities for each row of `x`.
    pub fn predict_proba(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut logits = x.matmul(&self.weights)?;
        for r in 0..logits.rows() {
            let row = logits.row_mut(r);
            for (z, b) in row.iter_mut().zip(&self.bias) {
                *z += b;
            }
            softmax_in_place(row);
        }
        Ok(logits)
    }

    /// Mean cross-entropy over `rows` of `x` against `targets`, plus its
    /// gradient laid out like [`LinearModel::params`].
    pub fn loss_and_gradient(
        &self,
        x: &DenseMatrix,
        targets: &[usize],
        rows: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        let (d, c) = self.weights.shape();
        if x.cols() != d {
            return Err(Error::dimension("LinearModel features", d, x.cols()));
        }
        let mut grad_w = vec![0.0; d * c];
        let mut grad_b = vec![0.0; c];
        let mut loss = 0.0;
        let mut p = vec![0.0; c];
        let scale = 1.0 / rows.len().max(1) as f64;
        for &r in rows {
            let xr = x.row(r);
            p.copy_from_slice(&self.bias);
            for (j, &xj) in xr.iter().enumerate() {
                if xj != 0.0 {
                    for (pk, &w) in p.iter_mut().zip(self.weights.row(j)) {
                        *pk += xj * w;
                    }
                }
            }
            softmax_in_place(&mut p);
            let y = targets[r];
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            p[y] -= 1.0;
            for (j, &xj) in xr.iter().enumerate() {
                let g = &mut grad_w[j * c..(j + 1) * c];
                for (gk, &dk) in g.iter_mut().zip(&p) {
                    *gk += xj * dk;
                }
            }
            for (gb, &dk) in grad_b.iter_mut().zip(&p) {
                *gb += dk;
            }
        }
        let mut grad = grad_w;
        grad.extend(grad_b);
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((loss * scale, grad))
    }

    /// Weights (row-major) followed by the bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.as_slice().to_vec();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let (d, c) = self.weights.shape();
        if params.len() != d * c + c {
            return Err(Error::dimension("LinearModel::set_params", d * c + c, params.len()));
        }
        self.weights = DenseMatrix::from_vec(d, c, params[..d * c].to_vec())?;
        self.bias.copy_from_slice(&params[d * c..]);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.version != LINEAR_MODEL_VERSION {
            return Err(Error::InvalidData(format!("unsupported model version {}", m.version)));
        }
        Ok(m)
    }
}

/// `Ã^k X` with self contributions kept.
pub fn smoothed_features(a_norm: &NormalizedAdjacency, x: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    a_norm.power_apply(x, k)
}

#[derive(Debug, Clone)]
pub struct TrainedBase {
    pub model: LinearModel,
    pub probabilities: SoftmaxMatrix,
    pub train_accuracy: f64,
}

/// Fits the built-in classifier on the training split's observed labels by
/// full-batch gradient descent with momentum, then predicts every node.
pub fn train_base(g: &Graph, config: BaseConfig) -> Result<TrainedBase> {
    let x = g
        .features()
        .ok_or_else(|| Error::InvalidData("base classifier needs node features".into()))?;
    let train = g.nodes_in(Split::Train);
    if train.is_empty() {
        return Err(Error::InvalidData("training split is empty".into()));
    }
    let a = normalized_adjacency(g);
    let xs = smoothed_features(&a, x, config.k_base)?;
    let targets = g.dense_labels();
    let mut model = LinearModel::zeros(x.cols(), g.num_classes(), config);
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    for _ in 0..config.epochs {
        let (_, grad) = model.loss_and_gradient(&xs, &targets, &train)?;
        for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
            *v = config.momentum * *v - config.step * g;
            *p += *v;
        }
        model.set_params(&params)?;
    }
    let probabilities = SoftmaxMatrix::new(model.predict_proba(&xs)?)?;
    let correct = train
        .iter()
        .filter(|&&v| probabilities.argmax(v) == targets[v])
        .count();
    Ok(TrainedBase {
        model,
        probabilities,
        train_accuracy: correct as f64 / train.len() as f64,
    })
}
