//! Conformal thresholds with false-positive and false-negative guarantees.
//!
//! Given `N` exchangeable mislabel scores of which a fraction `p` are
//! mislabelled, the threshold is an order statistic `s_(B)` of the sorted
//! scores. With `N_U` samples from the distribution of interest and
//! `N_V = N − N_U` from the other one,
//!
//! ```text
//! B = ⌈(N_U + 1)(1 − α) + N_V⌉
//! ```
//!
//! bounds the probability that a fresh sample from the distribution of
//! interest scores above `s_(B)` by `α`. False-positive mode takes the
//! correctly labelled samples as that distribution (`N_U = N(1 − p)`);
//! false-negative mode takes the mislabelled ones (`N_U = Np`) and works on
//! the modified score `s' = (1 − s)·1{s > 0.5}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack absorbed before taking the ceiling so that values which are integers
/// in exact arithmetic do not round up from representation error.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuaranteeMode {
    FalsePositive,
    FalseNegative,
}

/// A selected threshold and the quantities that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalThreshold {
    pub mode: GuaranteeMode,
    pub alpha: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n_total: usize,
    /// 1-based order-statistic index.
    #[serde(rename = "B")]
    pub b_index: usize,
    pub lambda: f64,
}

impl ConformalThreshold {
    /// Whether a node with `score` is flagged as mislabelled under this
    /// threshold. False-positive mode flags scores strictly above `λ`;
    /// false-negative mode flags nodes the detector calls mislabelled
    /// (`s > 0.5`) whose modified score is within `λ`.
    pub fn flags(&self, score: f64) -> bool {
        match self.mode {
            GuaranteeMode::FalsePositive => score > self.lambda,
            GuaranteeMode::FalseNegative => score > 0.5 && modified_score(score) <= self.lambda,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `⌈(N_U + 1)(1 − α) + N_V⌉` with `N_U = n·u_frac`, `N_V = n − N_U`.
pub fn order_index(n: usize, u_frac: f64, alpha: f64) -> usize {
    let n_f = n as f64;
    let n_u = n_f * u_frac;
    let n_v = n_f - n_u;
    ((n_u + 1.0) * (1.0 - alpha) + n_v - CEIL_SLACK).ceil().max(0.0) as usize
}

fn validate(n: usize, p: f64, alpha: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("no scores to calibrate on".into()));
    }
    let lo = 1.0 / (n as f64 + 1.0);
    if !(alpha > lo && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} outside ({lo}, 1) for N = {n}"
        )));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("mislabel fraction p = {p} outside [0, 1)")));
    }
    Ok(())
}

fn select(
    mut scores: Vec<f64>,
    mode: GuaranteeMode,
    u_frac: f64,
    p: f64,
    alpha: f64,
) -> Result<ConformalThreshold> {
    let n = scores.len();
    validate(n, p, alpha)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidData("NaN mislabel score".into()));
    }
    let b = order_index(n, u_frac, alpha);
    if b > n {
        return Err(Error::GuaranteeUnattainable { b_index: b, n });
    }
    let b = b.max(1);
    scores.sort_by(f64::total_cmp);
    Ok(ConformalThreshold {
        mode,
        alpha,
        p,
        n_total: n,
        b_index: b,
        lambda: scores[b - 1],
    })
}

/// False-positive guarantee: a fresh correctly labelled sample scores at
/// most `λ` with probability at least `1 − α`.
pub fn fp_threshold(scores: &[f64], p: f64, alpha: f64) -> Result<ConformalThreshold> {
    select(scores.to_vec(), GuaranteeMode::FalsePositive, 1.0 - p, p, alpha)
}

/// `(1 − s)` when `s > 0.5`, else `0`.
pub fn modified_score(s: f64) -> f64 {
    if s > 0.5 {
        1.0 - s
    } else {
        0.0
    }
}

pub fn modified_scores(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| modified_score(s)).collect()
}

/// False-negative guarantee: a fresh mislabelled sample has modified score
/// at most `λ` with probability at least `1 − α`.
pub fn fn_threshold(scores: &[f64], p: f64, alpha: f64) -> Result<ConformalThreshold> {
    select(modified_scores(scores), GuaranteeMode::FalseNegative, p, p, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten() -> Vec<f64> {
        vec![0.9, 0.1, 0.8, 0.2, 0.7, 0.3, 0.6, 0.4, 0.55, 0.05]
    }

    #[test]
    fn fp_index_fixture() {
        let t = fp_threshold(&ten(), 0.2, 0.5).unwrap();
        assert_eq!(t.b_index, 7);
        assert_eq!(t.lambda, 0.6);
    }

    #[test]
    fn fn_index_fixture() {
        let t = fn_threshold(&ten(), 0.2, 0.5).unwrap();
        assert_eq!(t.b_index, 10);
        let max = modified_scores(&ten()).into_iter().fold(0.0, f64::max);
        assert_eq!(t.lambda, max);
    }

    #[test]
    fn p_zero_is_split_conformal() {
        for n in [5usize, 19, 100] {
            for alpha in [0.05, 0.1, 0.25, 0.5, 0.9] {
                if alpha <= 1.0 / (n as f64 + 1.0) {
                    continue;
                }
                let want = ((n as f64 + 1.0) * (1.0 - alpha) - CEIL_SLACK).ceil() as usize;
                let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
                match fp_threshold(&scores, 0.0, alpha) {
                    Ok(t) => assert_eq!(t.b_index, want.max(1)),
                    Err(Error::GuaranteeUnattainable { b_index, .. }) => assert_eq!(b_index, want),
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn modified_score_boundaries() {
        assert!((modified_score(0.9) - 0.1).abs() < 1e-15);
        assert_eq!(modified_score(0.5), 0.0);
        assert_eq!(modified_score(0.2), 0.0);
    }

    #[test]
    fn low_scores_give_zero_fn_threshold() {
        let t = fn_threshold(&[0.1, 0.5, 0.3, 0.2], 0.25, 0.5).unwrap();
        assert_eq!(t.lambda, 0.0);
    }

    #[test]
    fn argument_errors() {
        assert!(fp_threshold(&[], 0.1, 0.5).is_err());
        assert!(fp_threshold(&[0.1; 10], 0.1, 0.05).is_err());
        assert!(fp_threshold(&[0.1; 10], 1.0, 0.5).is_err());
        assert!(fp_threshold(&[0.1; 10], 0.1, 1.0).is_err());
    }

    #[test]
    fn unattainable_reported_not_clamped() {
        // (7 + 1)(0.905) + 3 = 10.24, so B = 11 > N
        let err = fp_threshold(&[0.5; 10], 0.3, 0.095).unwrap_err();
        assert!(matches!(err, Error::GuaranteeUnattainable { n: 10, .. }), "{err}");
    }

    #[test]
    fn fn_flag_rule() {
        let t = ConformalThreshold {
            mode: GuaranteeMode::FalseNegative,
            alpha: 0.1,
            p: 0.1,
            n_total: 10,
            b_index: 10,
            lambda: 0.2,
        };
        assert!(t.flags(0.9));
        assert!(!t.flags(0.7));
        assert!(!t.flags(0.3));
    }

    #[test]
    fn report_json_keys() {
        let t = fp_threshold(&ten(), 0.2, 0.5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        for k in ["mode", "alpha", "p", "N", "B", "lambda"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert_eq!(v["mode"], "false_positive");
    }
}
