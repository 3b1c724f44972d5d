//! Planted-partition (stochastic block model) graphs with Gaussian features.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::matrix::DenseMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub n: usize,
    pub c: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Feature dimension.
    pub d: usize,
    /// Norm of each class mean; features are unit-variance around it.
    pub signal: f64,
    /// Train, validation and test fractions.
    pub splits: [f64; 3],
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            c: 5,
            p_in: 0.03,
            p_out: 0.002,
            d: 16,
            signal: 1.5,
            splits: [0.4, 0.3, 0.3],
            seed: 0,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.c == 0 || self.c > self.n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= c <= n, got n = {}, c = {}",
                self.n, self.c
            )));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= p_out < p_in <= 1, got p_in = {}, p_out = {}",
                self.p_in, self.p_out
            )));
        }
        let total: f64 = self.splits.iter().sum();
        if self.splits.iter().any(|&f| f < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions {:?} must be non-negative and sum to 1",
                self.splits
            )));
        }
        if self.d == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        Ok(())
    }

    /// Planted class of node `v`: contiguous, near-equal blocks.
    pub fn class_of(&self, v: usize) -> usize {
        v * self.c / self.n
    }

    fn block_start(&self, class: usize) -> usize {
        (class * self.n).div_ceil(self.c)
    }
}

/// Samples a graph. Classes are contiguous id blocks; splits are stratified
/// per class.
pub fn gen_sbm(cfg: &SbmConfig) -> Result<Graph> {
    cfg.validate()?;
    let n = cfg.n;
    let labels: Vec<usize> = (0..n).map(|v| cfg.class_of(v)).collect();
    let mut r = rng::stream(cfg.seed, "sbm-edges");
    let mut edges = Vec::new();
    for (u, &cu) in labels.iter().enumerate() {
        let block_end = cfg.block_start(cu + 1).min(n);
        sample_range(&mut r, u, u + 1, block_end, cfg.p_in, &mut edges);
        sample_range(&mut r, u, block_end, n, cfg.p_out, &mut edges);
    }

    let mut r = rng::stream(cfg.seed, "sbm-features");
    let means = class_means(cfg, &mut r);
    let mut x = DenseMatrix::zeros(n, cfg.d);
    for v in 0..n {
        let mean = &means[labels[v]];
        for (dst, &m) in x.row_mut(v).iter_mut().zip(mean) {
            let z: f64 = StandardNormal.sample(&mut r);
            *dst = m + z;
        }
    }

    let mut r = rng::stream(cfg.seed, "sbm-splits");
    let mut splits = vec![Split::Test; n];
    for class in 0..cfg.c {
        let mut members: Vec<usize> =
            (cfg.block_start(class)..cfg.block_start(class + 1).min(n)).collect();
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut r);
        let m = members.len() as f64;
        let n_train = (cfg.splits[0] * m).round() as usize;
        let n_val = ((cfg.splits[1] * m).round() as usize).min(members.len() - n_train);
        for (i, &v) in members.iter().enumerate() {
            splits[v] = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    let labels = labels.into_iter().map(Some).collect();
    Ok(Graph::new(cfg.c, edges, labels, splits, Some(x))?.0)
}

/// Bernoulli(p) edges from `u` to each `v` in `[lo, hi)`, by geometric skips.
fn sample_range(r: &mut impl Rng, u: usize, lo: usize, hi: usize, p: f64, out: &mut Vec<(usize, usize)>) {
    if p <= 0.0 || lo >= hi {
        return;
    }
    if p >= 1.0 {
        out.extend((lo..hi).map(|v| (u, v)));
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut v = lo;
    loop {
        let uni: f64 = 1.0 - r.random::<f64>(); // (0, 1]
        let skip = (uni.ln() / log_q).floor();
        if skip >= (hi - v) as f64 {
            break;
        }
        v += skip as usize;
        out.push((u, v));
        v += 1;
        if v >= hi {
            break;
        }
    }
}

/// Class means of norm `signal`: axis directions when `d >= c`, random unit
/// directions otherwise.
fn class_means(cfg: &SbmConfig, r: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..cfg.c)
        .map(|j| {
            if cfg.d >= cfg.c {
                let mut m = vec![0.0; cfg.d];
                m[j] = cfg.signal;
                m
            } else {
                let raw: Vec<f64> = (0..cfg.d).map(|_| StandardNormal.sample(&mut *r)).collect();
                let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                raw.into_iter().map(|x| x / norm * cfg.signal).collect()
            }
        })
        .collect()
}
