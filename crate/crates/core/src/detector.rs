//! The mislabel detector: a small MLP over agreement features, trained with
//! an L1 objective on synthetic flips, plus thresholding and corrections.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::base::SoftmaxMatrix;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

/// Default decision threshold on mislabel scores.
pub const DEFAULT_THRESHOLD: f64 = 0.97;

pub const DETECTOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub hidden: Vec<usize>,
    pub step: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Epochs without held-out improvement before stopping.
    pub patience: usize,
    /// Fraction of training rows held out for early stopping.
    pub holdout: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            step: 0.05,
            momentum: 0.9,
            max_epochs: 500,
            patience: 25,
            holdout: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `inputs × outputs`.
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn inputs(&self) -> usize {
        self.weights.rows()
    }

    fn outputs(&self) -> usize {
        self.weights.cols()
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, &w) in out.iter_mut().zip(self.weights.row(i)) {
                    *o += xi * w;
                }
            }
        }
    }
}

/// ReLU hidden layers followed by one sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub version: u32,
    pub layers: Vec<Layer>,
    pub config: DetectorConfig,
    pub seed: u64,
    /// Epochs actually run before early stopping.
    pub epochs_run: usize,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl DetectorModel {
    /// Randomly initialized network (He-uniform hidden, Glorot-uniform output,
    /// zero biases).
    pub fn init(inputs: usize, config: DetectorConfig, seed: u64) -> Self {
        let mut r = rng::stream(seed, "detector-init");
        let mut sizes = vec![inputs];
        sizes.extend(&config.hidden);
        sizes.push(1);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(li, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = if li == last {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                } else {
                    (6.0 / fan_in.max(1) as f64).sqrt()
                };
                let data = (0..fan_in * fan_out)
                    .map(|_| r.random_range(-limit..limit))
                    .collect();
                Layer {
                    weights: DenseMatrix::from_vec(fan_in, fan_out, data).expect("finite init"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Self {
            version: DETECTOR_VERSION,
            layers,
            config,
            seed,
            epochs_run: 0,
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    /// Mislabel score in `[0, 1]` for one feature row.
    pub fn score_row(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if li < last {
                next.iter_mut().for_each(|h| *h = h.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        sigmoid(cur[0])
    }

    /// Scores every row of `z`.
    pub fn score(&self, z: &DenseMatrix) -> Result<Vec<f64>> {
        if z.cols() != self.num_inputs() {
            return Err(Error::dimension("DetectorModel::score", self.num_inputs(), z.cols()));
        }
        Ok(z.row_iter().map(|r| self.score_row(r)).collect())
    }

    /// Mean absolute error between scores and targets over `rows`, and its
    /// (sub)gradient laid out like [`DetectorModel::params`].
    pub fn loss_and_gradient(&self, x: &DenseMatrix, targets: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let nl = self.layers.len();
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.inputs() * l.outputs()], vec![0.0; l.outputs()]))
            .collect();
        let mut loss = 0.0;
        let scale = 1.0 / rows.len().max(1) as f64;
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); nl + 1];
        for &r in rows {
            acts[0].clear();
            acts[0].extend_from_slice(x.row(r));
            for li in 0..nl {
                let (done, rest) = acts.split_at_mut(li + 1);
                self.layers[li].forward(&done[li], &mut rest[0]);
                if li + 1 < nl {
                    rest[0].iter_mut().for_each(|h| *h = h.max(0.0));
                }
            }
            let s = sigmoid(acts[nl][0]);
            let diff = s - targets[r];
            loss += diff.abs();
            // d|s - y|/d logit
            let mut delta = vec![diff.signum() * (diff != 0.0) as u8 as f64 * s * (1.0 - s)];
            for li in (0..nl).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                let out = layer.outputs();
                for (i, &xi) in input.iter().enumerate() {
                    if xi != 0.0 {
                        for (g, &d) in gw[i * out..(i + 1) * out].iter_mut().zip(&delta) {
                            *g += xi * d;
                        }
                    }
                }
                for (g, &d) in gb.iter_mut().zip(&delta) {
                    *g += d;
                }
                if li > 0 {
                    delta = (0..layer.inputs())
                        .map(|i| {
                            if input[i] <= 0.0 {
                                0.0
                            } else {
                                layer.weights.row(i).iter().zip(&delta).map(|(w, d)| w * d).sum()
                            }
                        })
                        .collect();
                }
            }
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for (gw, gb) in grads {
            flat.extend(gw.into_iter().map(|g| g * scale));
            flat.extend(gb.into_iter().map(|g| g * scale));
        }
        (loss * scale, flat)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.inputs() * l.outputs() + l.outputs()).sum()
    }

    /// Per layer: weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            p.extend_from_slice(l.weights.as_slice());
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::dimension("DetectorModel::set_params", self.num_params(), params.len()));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let (i, o) = l.weights.shape();
            l.weights = DenseMatrix::from_vec(i, o, params[at..at + i * o].to_vec())?;
            at += i * o;
            l.bias.copy_from_slice(&params[at..at + o]);
            at += o;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.version != DETECTOR_VERSION {
            return Err(Error::InvalidData(format!("unsupported detector version {}", m.version)));
        }
        if m.layers.is_empty() || m.layers.last().is_some_and(|l| l.outputs() != 1) {
            return Err(Error::InvalidData("detector must end in a single output unit".into()));
        }
        Ok(m)
    }
}

/// Fits the detector on rows of `z` with binary targets (`true` = synthetic
/// mislabel). Full-batch momentum descent; the best parameters on a held-out
/// slice are kept.
pub fn train_detector(
    z: &DenseMatrix,
    flipped: &[bool],
    config: DetectorConfig,
    seed: u64,
) -> Result<DetectorModel> {
    if z.rows() != flipped.len() {
        return Err(Error::dimension("train_detector", z.rows(), flipped.len()));
    }
    if z.rows() < 2 {
        return Err(Error::InvalidData("detector needs at least two training rows".into()));
    }
    if flipped.iter().all(|&f| f) || flipped.iter().all(|&f| !f) {
        return Err(Error::InvalidData(
            "detector targets are degenerate: every flag has the same value".into(),
        ));
    }
    if !(config.holdout >= 0.0 && config.holdout < 1.0) {
        return Err(Error::InvalidArgument(format!("holdout {} outside [0, 1)", config.holdout)));
    }
    let targets: Vec<f64> = flipped.iter().map(|&f| f as u8 as f64).collect();
    let mut order: Vec<usize> = (0..z.rows()).collect();
    order.shuffle(&mut rng::stream(seed, "detector-holdout"));
    let n_hold = ((config.holdout * z.rows() as f64).round() as usize).min(z.rows() - 1);
    let (held, fit) = order.split_at(n_hold);
    let (mut held, mut fit) = (held.to_vec(), fit.to_vec());
    held.sort_unstable();
    fit.sort_unstable();

    let mut model = DetectorModel::init(z.cols(), config.clone(), seed);
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut stale = 0;
    let mut epochs = 0;
    for epoch in 1..=config.max_epochs {
        let (_, grad) = model.loss_and_gradient(z, &targets, &fit);
        for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
            *v = config.momentum * *v - config.step * g;
            *p += *v;
        }
        model.set_params(&params)?;
        epochs = epoch;
        if held.is_empty() {
            continue;
        }
        let (held_loss, _) = model.loss_and_gradient(z, &targets, &held);
        if held_loss < best.0 {
            best = (held_loss, params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    if !held.is_empty() {
        model.set_params(&best.1)?;
    }
    model.epochs_run = epochs;
    Ok(model)
}

/// `flags[v] = scores[v] > threshold`.
pub fn classify(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}

/// Prior-shift cutoff for a detector trained on balanced data: flag when
/// the balanced-prior score exceeds `1 − expected_rate`.
pub fn bayes_threshold(expected_rate: f64) -> Result<f64> {
    if !(expected_rate > 0.0 && expected_rate < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "expected mislabel rate {expected_rate} outside (0, 1)"
        )));
    }
    Ok(1.0 - expected_rate)
}

/// Argmax of the base prediction for flagged nodes.
pub fn suggest_corrections(flags: &[bool], p: &SoftmaxMatrix) -> Vec<Option<usize>> {
    flags
        .iter()
        .enumerate()
        .map(|(v, &f)| f.then(|| p.argmax(v)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MislabelScores {
    pub scores: Vec<f64>,
    pub threshold: f64,
    pub flags: Vec<bool>,
    pub suggestions: Vec<Option<usize>>,
}

impl MislabelScores {
    pub fn new(scores: Vec<f64>, threshold: f64, p: &SoftmaxMatrix) -> Self {
        let flags = classify(&scores, threshold);
        let suggestions = suggest_corrections(&flags, p);
        Self {
            scores,
            threshold,
            flags,
            suggestions,
        }
    }
}
