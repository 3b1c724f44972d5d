//! Synthetic mislabel generation.
//!
//! Three injectors share one output type: transition-driven flips for
//! building the detector's training set, and symmetric / asymmetric
//! noise for evaluation with known ground truth.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Off-diagonal mass below which a transition column is treated as empty.
const MIN_OFF_DIAGONAL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptedLabels {
    pub original: Vec<usize>,
    pub labels: Vec<usize>,
    pub flipped: Vec<bool>,
    pub seed: u64,
}

impl CorruptedLabels {
    fn unchanged(labels: &[usize], seed: u64) -> Self {
        Self {
            original: labels.to_vec(),
            labels: labels.to_vec(),
            flipped: vec![false; labels.len()],
            seed,
        }
    }

    fn set(&mut self, v: usize, label: usize) {
        self.labels[v] = label;
        self.flipped[v] = label != self.original[v];
    }

    pub fn num_flipped(&self) -> usize {
        self.flipped.iter().filter(|&&f| f).count()
    }

    /// `node_id,original,corrupted,flipped` rows for the listed nodes.
    pub fn to_csv(&self, nodes: impl IntoIterator<Item = usize>) -> String {
        let mut s = String::from("node_id,original,corrupted,flipped\n");
        for v in nodes {
            s.push_str(&format!(
                "{v},{},{},{}\n",
                self.original[v], self.labels[v], self.flipped[v]
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Sym,
    Asym,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Sym => "sym",
            NoiseKind::Asym => "asym",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" | "symmetric" => Ok(NoiseKind::Sym),
            "asym" | "asymmetric" => Ok(NoiseKind::Asym),
            other => Err(Error::InvalidArgument(format!("unknown noise kind {other:?}"))),
        }
    }
}

fn check_fraction(name: &str, x: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero {
        (0.0..=1.0).contains(&x)
    } else {
        x > 0.0 && x <= 1.0
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {x} outside its allowed range")))
    }
}

/// Uniform sample without replacement of `⌊ratio · |val_nodes|⌋` nodes,
/// returned in ascending order.
pub fn sample_synthetic_set(val_nodes: &[usize], ratio: f64, seed: u64) -> Result<Vec<usize>> {
    check_fraction("ratio", ratio, false)?;
    if val_nodes.is_empty() {
        return Err(Error::InvalidData("no validation nodes to sample from".into()));
    }
    let k = (ratio * val_nodes.len() as f64).floor() as usize;
    let mut r = rng::stream(seed, "synthetic-set");
    let mut picked: Vec<usize> = index::sample(&mut r, val_nodes.len(), k)
        .into_iter()
        .map(|i| val_nodes[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Flips every node in `node_set` away from its label `j`, drawing the new
/// label `i ≠ j` with probability proportional to `conditional[i][j]`.
pub fn flip_by_transition(
    labels: &[usize],
    node_set: &[usize],
    conditional: &[Vec<f64>],
    seed: u64,
) -> Result<CorruptedLabels> {
    let c = conditional.len();
    if c < 2 {
        return Err(Error::InvalidArgument("flipping needs at least two classes".into()));
    }
    let mut r = rng::stream(seed, "transition-flip");
    let mut out = CorruptedLabels::unchanged(labels, seed);
    for &v in node_set {
        let j = labels[v];
        let mass: f64 = (0..c).filter(|&i| i != j).map(|i| conditional[i][j]).sum();
        let target = if mass < MIN_OFF_DIAGONAL {
            other_class(&mut r, j, c)
        } else {
            let mut u = r.random::<f64>() * mass;
            let mut pick = None;
            for i in (0..c).filter(|&i| i != j) {
                let w = conditional[i][j];
                if w > 0.0 {
                    pick = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            pick.expect("positive off-diagonal mass has a positive entry")
        };
        out.set(v, target);
    }
    Ok(out)
}

/// Uniform draw from the `c - 1` classes other than `j`.
fn other_class(r: &mut impl Rng, j: usize, c: usize) -> usize {
    let k = r.random_range(0..c - 1);
    if k >= j {
        k + 1
    } else {
        k
    }
}

/// Relabels exactly `⌊eps · |node_set|⌋` uniformly chosen nodes to a uniformly
/// chosen different class.
pub fn inject_symmetric(
    labels: &[usize],
    node_set: &[usize],
    num_classes: usize,
    eps: f64,
    seed: u64,
) -> Result<CorruptedLabels> {
    check_fraction("eps", eps, true)?;
    let mut out = CorruptedLabels::unchanged(labels, seed);
    let k = (eps * node_set.len() as f64).floor() as usize;
    if k == 0 {
        return Ok(out);
    }
    if num_classes < 2 {
        return Err(Error::InvalidArgument("symmetric noise needs at least two classes".into()));
    }
    let mut r = rng::stream(seed, "symmetric-noise");
    let mut chosen: Vec<usize> = index::sample(&mut r, node_set.len(), k)
        .into_iter()
        .map(|i| node_set[i])
        .collect();
    chosen.sort_unstable();
    for v in chosen {
        let t = other_class(&mut r, labels[v], num_classes);
        out.set(v, t);
    }
    Ok(out)
}

/// Relabels exactly `⌊eps · n_i⌋` uniformly chosen class-`i` nodes of
/// `node_set` to class `(i + 1) mod c`, for every class `i`.
pub fn inject_asymmetric(
    labels: &[usize],
    node_set: &[usize],
    num_classes: usize,
    eps: f64,
    seed: u64,
) -> Result<CorruptedLabels> {
    check_fraction("eps", eps, true)?;
    let mut out = CorruptedLabels::unchanged(labels, seed);
    if num_classes < 2 {
        return if eps == 0.0 {
            Ok(out)
        } else {
            Err(Error::InvalidArgument("asymmetric noise needs at least two classes".into()))
        };
    }
    let mut r = rng::stream(seed, "asymmetric-noise");
    for class in 0..num_classes {
        let members: Vec<usize> = node_set.iter().copied().filter(|&v| labels[v] == class).collect();
        let k = (eps * members.len() as f64).floor() as usize;
        let mut chosen: Vec<usize> = index::sample(&mut r, members.len(), k)
            .into_iter()
            .map(|i| members[i])
            .collect();
        chosen.sort_unstable();
        for v in chosen {
            out.set(v, (class + 1) % num_classes);
        }
    }
    Ok(out)
}

/// Applies one injector to each node set independently (e.g. the three
/// splits) with per-set seeds derived from `seed`.
pub fn inject_per_set(
    labels: &[usize],
    node_sets: &[&[usize]],
    num_classes: usize,
    kind: NoiseKind,
    eps: f64,
    seed: u64,
) -> Result<CorruptedLabels> {
    let mut out = CorruptedLabels::unchanged(labels, seed);
    for (i, set) in node_sets.iter().enumerate() {
        let s = rng::derive_seed(seed, "noise-set", i as u64);
        let part = match kind {
            NoiseKind::Sym => inject_symmetric(labels, set, num_classes, eps, s)?,
            NoiseKind::Asym => inject_asymmetric(labels, set, num_classes, eps, s)?,
        };
        for &v in set.iter() {
            out.set(v, part.labels[v]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_set_size_is_floored() {
        let val: Vec<usize> = (100..110).collect();
        let s = sample_synthetic_set(&val, 0.5, 1).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|v| val.contains(v)));
        assert_eq!(sample_synthetic_set(&val, 1.0, 1).unwrap(), val);
        assert_eq!(sample_synthetic_set(&val, 0.5, 1).unwrap(), s);
    }

    #[test]
    fn synthetic_ratio_out_of_range() {
        assert!(sample_synthetic_set(&[1, 2], 0.0, 1).is_err());
        assert!(sample_synthetic_set(&[1, 2], 1.5, 1).is_err());
        assert!(sample_synthetic_set(&[], 0.5, 1).is_err());
    }

    #[test]
    fn diagonal_only_column_falls_back() {
        let cond = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let out = flip_by_transition(&[0, 0, 1], &[0, 1, 2], &cond, 4).unwrap();
        assert_eq!(out.labels, vec![1, 1, 0]);
        assert!(out.flipped.iter().all(|&f| f));
    }

    #[test]
    fn restricted_column_is_renormalized() {
        let cond = vec![vec![1.0, 1.0 / 3.0], vec![0.0, 2.0 / 3.0]];
        for seed in 0..20 {
            let out = flip_by_transition(&[1], &[0], &cond, seed).unwrap();
            assert_eq!(out.labels, vec![0]);
        }
    }

    #[test]
    fn single_class_cannot_flip() {
        assert!(flip_by_transition(&[0], &[0], &[vec![1.0]], 0).is_err());
    }

    #[test]
    fn zero_eps_is_identity() {
        let y = vec![0, 1, 2, 0, 1];
        let nodes: Vec<usize> = (0..5).collect();
        assert_eq!(inject_symmetric(&y, &nodes, 3, 0.0, 1).unwrap().labels, y);
        assert_eq!(inject_asymmetric(&y, &nodes, 3, 0.0, 1).unwrap().labels, y);
    }

    #[test]
    fn asymmetric_exact_per_class_counts() {
        let y: Vec<usize> = (0..20).map(|v| v % 2).collect();
        let nodes: Vec<usize> = (0..20).collect();
        let out = inject_asymmetric(&y, &nodes, 2, 0.1, 9).unwrap();
        let zero_to_one = (0..20).filter(|&v| y[v] == 0 && out.labels[v] == 1).count();
        let one_to_zero = (0..20).filter(|&v| y[v] == 1 && out.labels[v] == 0).count();
        assert_eq!((zero_to_one, one_to_zero), (1, 1));
    }

    #[test]
    fn asymmetric_full_rate_shifts_everything() {
        let y = vec![0; 7];
        let nodes: Vec<usize> = (0..7).collect();
        assert_eq!(inject_asymmetric(&y, &nodes, 3, 1.0, 2).unwrap().labels, vec![1; 7]);
    }

    #[test]
    fn flips_stay_inside_node_set() {
        let y: Vec<usize> = (0..50).map(|v| v % 3).collect();
        let set: Vec<usize> = (10..30).collect();
        let out = inject_symmetric(&y, &set, 3, 0.5, 5).unwrap();
        assert_eq!(out.num_flipped(), 10);
        for v in 0..50 {
            assert_eq!(out.flipped[v], out.labels[v] != y[v]);
            if !set.contains(&v) {
                assert!(!out.flipped[v]);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let out = inject_asymmetric(&[0, 1], &[0, 1], 2, 1.0, 0).unwrap();
        assert_eq!(out.to_csv(0..2), "node_id,original,corrupted,flipped\n0,0,1,true\n1,1,0,true\n");
    }
}
