//! Confident-joint estimation of the mislabel transition matrix.
//!
//! Counting follows the set definition: a sample with observed label `i`
//! lands in cell `(i, j)` when `j` is the most probable class among those
//! whose probability reaches their per-class threshold. The estimate is
//! built from one node set, normally the validation split.

use serde::{Deserialize, Serialize};

use crate::base::SoftmaxMatrix;
use crate::error::{Error, Result};

/// Probability-mass floor below which a column counts as empty.
const EMPTY_COLUMN: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    /// Average self-confidence per class; `None` for classes absent from
    /// the node set (such classes can never be matched).
    pub thresholds: Vec<Option<f64>>,
    /// Rows: observed label. Columns: latent true label.
    pub confident_joint: Vec<Vec<u64>>,
    pub joint: Vec<Vec<f64>>,
    /// Column `j` is the distribution of observed labels given true class `j`.
    pub conditional: Vec<Vec<f64>>,
    /// Columns replaced by the uniform fallback.
    pub fallback_columns: Vec<bool>,
    /// Samples that reached no class threshold.
    pub uncounted: usize,
}

/// `t_j`: mean `p(x, j)` over members of `node_set` observed as class `j`.
pub fn class_thresholds(p: &SoftmaxMatrix, labels: &[usize], node_set: &[usize]) -> Vec<Option<f64>> {
    let c = p.num_classes();
    let mut sum = vec![0.0; c];
    let mut count = vec![0usize; c];
    for &v in node_set {
        let j = labels[v];
        sum[j] += p.row(v)[j];
        count[j] += 1;
    }
    sum.iter()
        .zip(&count)
        .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
        .collect()
}

/// Counts the confident joint; returns the matrix and the uncounted total.
pub fn confident_joint(
    p: &SoftmaxMatrix,
    labels: &[usize],
    thresholds: &[Option<f64>],
    node_set: &[usize],
) -> (Vec<Vec<u64>>, usize) {
    let c = p.num_classes();
    let mut joint = vec![vec![0u64; c]; c];
    let mut uncounted = 0;
    for &v in node_set {
        let row = p.row(v);
        let mut best: Option<usize> = None;
        for (j, (&pj, t)) in row.iter().zip(thresholds).enumerate() {
            let qualifies = matches!(t, Some(t) if pj >= *t);
            // strict > keeps the smallest class id on ties
            if qualifies && best.is_none_or(|b| pj > row[b]) {
                best = Some(j);
            }
        }
        match best {
            Some(j) => joint[labels[v]][j] += 1,
            None => uncounted += 1,
        }
    }
    (joint, uncounted)
}

/// Calibrates the confident joint into `Q̂(ỹ, y*)`: each row is normalized,
/// rescaled by the observed class count, and the whole matrix normalized
/// to sum one.
pub fn joint_distribution(confident: &[Vec<u64>], observed_counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    let c = confident.len();
    if observed_counts.len() != c {
        return Err(Error::dimension("joint_distribution", c, observed_counts.len()));
    }
    let mut q: Vec<Vec<f64>> = confident
        .iter()
        .zip(observed_counts)
        .map(|(row, &n)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                vec![0.0; c]
            } else {
                row.iter().map(|&x| x as f64 / total as f64 * n as f64).collect()
            }
        })
        .collect();
    let mass: f64 = q.iter().flatten().sum();
    if mass <= 0.0 {
        return Err(Error::InvalidData(
            "confident joint carries no mass: every observed class count or row is zero".into(),
        ));
    }
    q.iter_mut().flatten().for_each(|x| *x /= mass);
    Ok(q)
}

/// Column-normalizes the joint into `Q̂(ỹ = i | y* = j)`. Empty columns
/// become uniform and are flagged.
pub fn conditional_transition(joint: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<bool>) {
    let c = joint.len();
    let mut cond = vec![vec![0.0; c]; c];
    let mut fallback = vec![false; c];
    for j in 0..c {
        let col: f64 = joint.iter().map(|r| r[j]).sum();
        if col <= EMPTY_COLUMN {
            fallback[j] = true;
            for row in cond.iter_mut() {
                row[j] = 1.0 / c as f64;
            }
        } else {
            for (dst, src) in cond.iter_mut().zip(joint) {
                dst[j] = src[j] / col;
            }
        }
    }
    (cond, fallback)
}

/// Runs the whole estimator on `node_set`.
pub fn estimate(p: &SoftmaxMatrix, labels: &[usize], node_set: &[usize]) -> Result<TransitionModel> {
    if node_set.is_empty() {
        return Err(Error::InvalidData("transition estimation needs a nonempty node set".into()));
    }
    let thresholds = class_thresholds(p, labels, node_set);
    let (confident, uncounted) = confident_joint(p, labels, &thresholds, node_set);
    let mut counts = vec![0usize; p.num_classes()];
    for &v in node_set {
        counts[labels[v]] += 1;
    }
    let joint = joint_distribution(&confident, &counts)?;
    let (conditional, fallback_columns) = conditional_transition(&joint);
    if uncounted > 0 {
        log::info!("transition estimate: {uncounted} of {} samples reached no class threshold", node_set.len());
    }
    Ok(TransitionModel {
        thresholds,
        confident_joint: confident,
        joint,
        conditional,
        fallback_columns,
        uncounted,
    })
}

impl TransitionModel {
    pub fn num_classes(&self) -> usize {
        self.conditional.len()
    }

    /// For true class `j`, the most likely wrong observed class, or `None`
    /// when the column has no off-diagonal mass.
    pub fn dominant_confusion(&self, j: usize) -> Option<usize> {
        (0..self.num_classes())
            .filter(|&i| i != j)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if self.conditional[b][j] >= self.conditional[i][j] => Some(b),
                _ => Some(i),
            })
            .filter(|&i| self.conditional[i][j] > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;

    fn fixture() -> (SoftmaxMatrix, Vec<usize>) {
        let p = DenseMatrix::from_rows(&[
            vec![0.9, 0.1],
            vec![0.2, 0.8],
            vec![0.4, 0.6],
            vec![0.1, 0.9],
        ])
        .unwrap();
        (SoftmaxMatrix::new(p).unwrap(), vec![0, 0, 1, 1])
    }

    #[test]
    fn thresholds_average_self_confidence() {
        let (p, y) = fixture();
        let t = class_thresholds(&p, &y, &[0, 1, 2, 3]);
        assert!((t[0].unwrap() - 0.55).abs() < 1e-12);
        assert!((t[1].unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn absent_class_never_matches() {
        let (p, y) = fixture();
        let t = class_thresholds(&p, &y, &[0, 1]);
        assert_eq!(t[1], None);
        let (cj, unc) = confident_joint(&p, &y, &t, &[0, 1]);
        assert_eq!(cj, vec![vec![1, 0], vec![0, 0]]);
        assert_eq!(unc, 1);
    }

    #[test]
    fn single_member_threshold_is_its_confidence() {
        let p = SoftmaxMatrix::new(DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(class_thresholds(&p, &[0], &[0]), vec![Some(1.0), None]);
    }

    #[test]
    fn one_hot_predictions_give_diagonal_joint() {
        let y = vec![0, 1, 2, 1, 0];
        let p = SoftmaxMatrix::new(DenseMatrix::one_hot(y.iter().map(|&l| Some(l)), 3)).unwrap();
        let nodes: Vec<usize> = (0..5).collect();
        let t = class_thresholds(&p, &y, &nodes);
        let (cj, unc) = confident_joint(&p, &y, &t, &nodes);
        assert_eq!(cj, vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        assert_eq!(unc, 0);
        let q = joint_distribution(&cj, &[2, 2, 1]).unwrap();
        assert_eq!(q[0][0], 0.4);
        assert_eq!(q[2][2], 0.2);
        let (cond, fb) = conditional_transition(&q);
        assert_eq!(cond, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert!(fb.iter().all(|f| !f));
    }

    #[test]
    fn uniform_predictions_tie_to_class_zero() {
        let y = vec![0, 1, 2, 2];
        let p = SoftmaxMatrix::new(DenseMatrix::from_vec(4, 3, vec![1.0 / 3.0; 12]).unwrap()).unwrap();
        let nodes = [0, 1, 2, 3];
        let t = class_thresholds(&p, &y, &nodes);
        let (cj, unc) = confident_joint(&p, &y, &t, &nodes);
        assert_eq!(unc, 0);
        assert_eq!(cj, vec![vec![1, 0, 0], vec![1, 0, 0], vec![2, 0, 0]]);
    }

    #[test]
    fn zero_row_stays_zero() {
        let q = joint_distribution(&[vec![2, 0], vec![0, 0]], &[2, 3]).unwrap();
        assert_eq!(q, vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn all_zero_counts_rejected() {
        assert!(joint_distribution(&[vec![0, 0], vec![0, 0]], &[0, 0]).is_err());
    }

    #[test]
    fn empty_column_falls_back_to_uniform() {
        let (cond, fb) = conditional_transition(&[vec![0.5, 0.0], vec![0.5, 0.0]]);
        assert_eq!(fb, vec![false, true]);
        assert_eq!(cond[0][1], 0.5);
        assert_eq!(cond[1][1], 0.5);
    }

    #[test]
    fn dominant_confusion_skips_diagonal() {
        let (p, y) = fixture();
        let m = estimate(&p, &y, &[0, 1, 2, 3]).unwrap();
        assert_eq!(m.dominant_confusion(1), Some(0));
        assert_eq!(m.dominant_confusion(0), None);
    }
}
