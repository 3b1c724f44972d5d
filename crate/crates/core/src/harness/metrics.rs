//! Binary detection metrics against injected flip flags.

use serde::{Deserialize, Serialize};

use crate::base::SoftmaxMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_flags(flags: &[bool], truth: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&f, &t) in flags.iter().zip(truth) {
            match (f, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn f1(&self) -> Metric {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            return Metric::degenerate();
        }
        Metric::new(2.0 * self.tp as f64 / denom as f64)
    }

    pub fn mcc(&self) -> Metric {
        let (tp, fp, tn, fn_) = (self.tp as f64, self.fp as f64, self.tn as f64, self.fn_ as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return Metric::degenerate();
        }
        Metric::new((tp * tn - fp * fn_) / denom.sqrt())
    }
}

/// A metric value; `degenerate` marks an undefined ratio reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub degenerate: bool,
}

impl Metric {
    fn new(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    fn degenerate() -> Self {
        Self {
            value: 0.0,
            degenerate: true,
        }
    }
}

pub fn f1(flags: &[bool], truth: &[bool]) -> Metric {
    Confusion::from_flags(flags, truth).f1()
}

pub fn mcc(flags: &[bool], truth: &[bool]) -> Metric {
    Confusion::from_flags(flags, truth).mcc()
}

/// Fraction of truly flipped samples among the `t` highest scores; ties go
/// to the lower index.
pub fn precision_at_t(scores: &[f64], truth: &[bool], t: usize) -> Metric {
    if t == 0 || scores.is_empty() {
        return Metric::degenerate();
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let t = t.min(scores.len());
    let hits = order[..t].iter().filter(|&&i| truth[i]).count();
    Metric::new(hits as f64 / t as f64)
}

/// Flags samples whose predicted class differs from the given label.
pub fn baseline_argmax(p: &SoftmaxMatrix, labels: &[usize]) -> Vec<bool> {
    labels
        .iter()
        .enumerate()
        .map(|(v, &l)| p.argmax(v) != l)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;

    fn counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> (Vec<bool>, Vec<bool>) {
        let mut flags = Vec::new();
        let mut truth = Vec::new();
        for (n, f, t) in [(tp, true, true), (fp, true, false), (tn, false, false), (fn_, false, true)] {
            flags.extend(std::iter::repeat_n(f, n));
            truth.extend(std::iter::repeat_n(t, n));
        }
        (flags, truth)
    }

    #[test]
    fn f1_fixture() {
        let (f, t) = counts(2, 1, 0, 1);
        assert!((f1(&f, &t).value - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mcc_fixture() {
        let (f, t) = counts(2, 1, 3, 1);
        assert!((mcc(&f, &t).value - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn mcc_degenerate_row() {
        let (f, t) = counts(0, 0, 5, 2);
        let m = mcc(&f, &t);
        assert!(m.degenerate);
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn perfect_ranking() {
        let scores = [0.9, 0.1, 0.8, 0.2];
        let truth = [true, false, true, false];
        assert_eq!(precision_at_t(&scores, &truth, 2).value, 1.0);
        assert!(precision_at_t(&scores, &truth, 0).degenerate);
    }

    #[test]
    fn ties_broken_by_index() {
        let scores = [0.5, 0.5, 0.5];
        assert_eq!(precision_at_t(&scores, &[false, true, true], 1).value, 0.0);
        assert_eq!(precision_at_t(&scores, &[true, false, false], 1).value, 1.0);
    }

    #[test]
    fn argmax_baseline_cases() {
        let labels = vec![0, 1, 2];
        let p = SoftmaxMatrix::new(DenseMatrix::one_hot(labels.iter().map(|&l| Some(l)), 3)).unwrap();
        assert_eq!(baseline_argmax(&p, &labels), vec![false; 3]);
        let shifted = vec![1, 2, 0];
        assert_eq!(baseline_argmax(&p, &shifted), vec![true; 3]);
    }
}
