mod common;

use common::*;
use labelaudit::base::{BaseConfig, LinearModel};
use labelaudit::detector::{DetectorConfig, DetectorModel};
use rand::Rng;

const TOLERANCE: f64 = 1e-4;

#[test]
fn detector_gradient_matches_finite_differences() {
    let mut r = rng(3);
    for trial in 0..10 {
        let (n, d) = (12, 5);
        let x = random_dense(&mut r, n, d);
        let targets: Vec<f64> = (0..n).map(|_| r.random_range(0..2) as f64).collect();
        let rows: Vec<usize> = (0..n).filter(|&i| i % 3 != 0).collect();
        let mut model = DetectorModel::init(d, DetectorConfig::default(), trial);
        let theta: Vec<f64> = model.params().iter().map(|w| w + r.random_range(-0.3..0.3)).collect();
        model.set_params(&theta).unwrap();
        let (_, analytic) = model.loss_and_gradient(&x, &targets, &rows);
        let f = |p: &[f64]| {
            let mut m = model.clone();
            m.set_params(p).unwrap();
            m.loss_and_gradient(&x, &targets, &rows).0
        };
        let err = gradient_error(f, &theta, &analytic, 1e-6);
        assert!(err <= TOLERANCE, "trial {trial}: relative error {err}");
    }
}

#[test]
fn base_gradient_matches_finite_differences() {
    let mut r = rng(4);
    for trial in 0..10 {
        let (n, d, c) = (15, 4, 3);
        let x = random_dense(&mut r, n, d);
        let targets: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let rows: Vec<usize> = (0..n).collect();
        let mut model = LinearModel::zeros(d, c, BaseConfig::default());
        let theta: Vec<f64> = (0..model.params().len()).map(|_| r.random_range(-1.0..1.0)).collect();
        model.set_params(&theta).unwrap();
        let (_, analytic) = model.loss_and_gradient(&x, &targets, &rows).unwrap();
        let f = |p: &[f64]| {
            let mut m = model.clone();
            m.set_params(p).unwrap();
            m.loss_and_gradient(&x, &targets, &rows).unwrap().0
        };
        let err = gradient_error(f, &theta, &analytic, 1e-6);
        assert!(err <= TOLERANCE, "trial {trial}: relative error {err}");
    }
}
