mod common;

use common::*;
use labelaudit::harness::metrics::{f1, mcc, precision_at_t};
use proptest::prelude::*;
use rand::Rng;

fn oracle_f1(flags: &[bool], truth: &[bool]) -> Option<f64> {
    let flagged: Vec<usize> = (0..flags.len()).filter(|&i| flags[i]).collect();
    let actual: Vec<usize> = (0..truth.len()).filter(|&i| truth[i]).collect();
    let both = flagged.iter().filter(|i| actual.contains(i)).count() as f64;
    if flagged.is_empty() || actual.is_empty() || both == 0.0 {
        return if flagged.is_empty() && actual.is_empty() { None } else { Some(0.0) };
    }
    let precision = both / flagged.len() as f64;
    let recall = both / actual.len() as f64;
    Some(2.0 * precision * recall / (precision + recall))
}

/// Pearson correlation of the two indicator vectors.
fn oracle_mcc(flags: &[bool], truth: &[bool]) -> Option<f64> {
    let n = flags.len() as f64;
    let x: Vec<f64> = flags.iter().map(|&b| b as u8 as f64).collect();
    let y: Vec<f64> = truth.iter().map(|&b| b as u8 as f64).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

fn oracle_p_at_t(scores: &[f64], truth: &[bool], t: usize) -> f64 {
    // repeated selection of the highest remaining score, lowest index first
    let mut taken = vec![false; scores.len()];
    let mut hits = 0;
    for _ in 0..t {
        let mut best: Option<usize> = None;
        for i in 0..scores.len() {
            if !taken[i] && best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        hits += truth[b] as usize;
    }
    hits as f64 / t as f64
}

#[test]
fn agree_with_brute_force_oracles() {
    let mut r = rng(17);
    for _ in 0..100 {
        let n = r.random_range(1..40);
        let flags: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
        let truth: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
        let got = f1(&flags, &truth);
        match oracle_f1(&flags, &truth) {
            Some(v) => assert!((got.value - v).abs() <= 1e-12 && !got.degenerate),
            None => assert!(got.degenerate && got.value == 0.0),
        }
        let got = mcc(&flags, &truth);
        match oracle_mcc(&flags, &truth) {
            Some(v) => assert!((got.value - v).abs() <= 1e-12 && !got.degenerate),
            None => assert!(got.degenerate && got.value == 0.0),
        }
        // coarse scores produce ties
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..5) as f64 / 4.0).collect();
        let t = r.random_range(1..=n);
        let got = precision_at_t(&scores, &truth, t);
        assert!((got.value - oracle_p_at_t(&scores, &truth, t)).abs() <= 1e-12);
    }
}

#[test]
fn fixed_values() {
    let flags = [true, true, false, false, true];
    let truth = [true, false, false, true, true];
    // tp 2, fp 1, tn 1, fn 1
    assert!((f1(&flags, &truth).value - 4.0 / 6.0).abs() <= 1e-12);
    assert!((mcc(&flags, &truth).value - 1.0 / 6.0).abs() <= 1e-12);
    assert_eq!(precision_at_t(&[0.9, 0.1, 0.8], &[true, false, false], 2).value, 0.5);
}

proptest! {
    #[test]
    fn precision_at_t_ignores_monotone_rescaling(
        scores in prop::collection::vec(0.0f64..1.0, 1..50),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let truth: Vec<bool> = scores.iter().map(|_| r.random_bool(0.4)).collect();
        let rescaled: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        for t in 1..=scores.len() {
            prop_assert_eq!(precision_at_t(&scores, &truth, t), precision_at_t(&rescaled, &truth, t));
        }
    }
}
