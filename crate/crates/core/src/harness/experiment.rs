//! Noisy-label experiments on block-model graphs: inject noise into every
//! split, fit the base classifier on the noisy labels, run detection and
//! score the test split against the injected flips.

use serde::{Deserialize, Serialize};

use super::metrics::{baseline_argmax, f1, mcc, precision_at_t, Metric};
use super::sbm::{gen_sbm, SbmConfig};
use crate::base::{train_base, BaseConfig, SoftmaxMatrix};
use crate::conformal::fp_threshold;
use crate::detector::{classify, DEFAULT_THRESHOLD};
use crate::error::Result;
use crate::graph::{Graph, Split};
use crate::noise::{inject_per_set, CorruptedLabels, NoiseKind};
use crate::pipeline::{detect, PipelineConfig};
use crate::rng;

pub const METHOD_OURS: &str = "ours";
pub const METHOD_BASELINE: &str = "baseline_argmax";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sbm: SbmConfig,
    pub base: BaseConfig,
    pub pipeline: PipelineConfig,
    pub threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sbm: SbmConfig::default(),
            base: BaseConfig::default(),
            pipeline: PipelineConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub noise: NoiseKind,
    pub eps: f64,
    pub seed: u64,
    pub f1: Metric,
    pub mcc: Metric,
    pub p_at_t: Metric,
    pub t_value: usize,
}

/// Everything one trial produced, for callers that need more than metrics.
pub struct Trial {
    pub graph: Graph,
    pub noise: CorruptedLabels,
    pub base: SoftmaxMatrix,
    pub base_clean_accuracy: f64,
    pub scores: Vec<f64>,
    pub reports: Vec<MetricReport>,
}

/// Seeds for the graph, the injected noise, the base classifier and the
/// detection pipeline, all derived from the trial seed.
fn trial_config(cfg: &ExperimentConfig, seed: u64) -> (SbmConfig, BaseConfig, PipelineConfig, u64) {
    let sbm = SbmConfig {
        seed: rng::derive_seed(seed, "trial-graph", 0),
        ..cfg.sbm.clone()
    };
    let base = BaseConfig {
        seed: rng::derive_seed(seed, "trial-base", 0),
        ..cfg.base
    };
    let pipeline = PipelineConfig {
        seed: rng::derive_seed(seed, "trial-pipeline", 0),
        ..cfg.pipeline.clone()
    };
    (sbm, base, pipeline, rng::derive_seed(seed, "trial-noise", 0))
}

pub fn run_trial(cfg: &ExperimentConfig, noise: NoiseKind, eps: f64, seed: u64) -> Result<Trial> {
    let (sbm, base_cfg, pipeline_cfg, noise_seed) = trial_config(cfg, seed);
    let clean = gen_sbm(&sbm)?;
    let truth_labels = clean.dense_labels();
    let train = clean.nodes_in(Split::Train);
    let val = clean.nodes_in(Split::Val);
    let test = clean.nodes_in(Split::Test);
    let corrupted = inject_per_set(
        &truth_labels,
        &[&train, &val, &test],
        clean.num_classes(),
        noise,
        eps,
        noise_seed,
    )?;
    let graph = clean.with_labels(corrupted.labels.iter().map(|&l| Some(l)).collect())?;

    let base = train_base(&graph, base_cfg)?.probabilities;
    let detection = detect(&graph, &base, &pipeline_cfg)?;

    let truth: Vec<bool> = test.iter().map(|&v| corrupted.flipped[v]).collect();
    let t = truth.iter().filter(|&&f| f).count();
    let ours_scores: Vec<f64> = test.iter().map(|&v| detection.scores[v]).collect();
    let ours_flags = classify(&ours_scores, cfg.threshold);

    let observed: Vec<usize> = test.iter().map(|&v| corrupted.labels[v]).collect();
    let test_p = SoftmaxMatrix::new(base.matrix().select_rows(&test))?;
    let base_flags = baseline_argmax(&test_p, &observed);
    // the baseline ranks by how little mass it puts on the given label
    let base_scores: Vec<f64> = observed
        .iter()
        .enumerate()
        .map(|(i, &l)| 1.0 - test_p.row(i)[l])
        .collect();

    let report = |method: &str, flags: &[bool], scores: &[f64]| MetricReport {
        method: method.to_string(),
        noise,
        eps,
        seed,
        f1: f1(flags, &truth),
        mcc: mcc(flags, &truth),
        p_at_t: precision_at_t(scores, &truth, t),
        t_value: t,
    };
    let reports = vec![
        report(METHOD_OURS, &ours_flags, &ours_scores),
        report(METHOD_BASELINE, &base_flags, &base_scores),
    ];

    let correct = test
        .iter()
        .filter(|&&v| base.argmax(v) == truth_labels[v])
        .count();
    Ok(Trial {
        graph,
        noise: corrupted,
        base,
        base_clean_accuracy: correct as f64 / test.len().max(1) as f64,
        scores: detection.scores,
        reports,
    })
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    eps: f64,
    noise: NoiseKind,
    seeds: &[u64],
) -> Result<Vec<MetricReport>> {
    let mut out = Vec::with_capacity(2 * seeds.len());
    for &seed in seeds {
        out.extend(run_trial(cfg, noise, eps, seed)?.reports);
    }
    sort_reports(&mut out);
    Ok(out)
}

/// All noise kinds × rates, sorted.
pub fn run_grid(
    cfg: &ExperimentConfig,
    noises: &[NoiseKind],
    rates: &[f64],
    seeds: &[u64],
) -> Result<Vec<MetricReport>> {
    let mut out = Vec::new();
    for &noise in noises {
        for &eps in rates {
            out.extend(run_experiment(cfg, eps, noise, seeds)?);
        }
    }
    sort_reports(&mut out);
    Ok(out)
}

pub fn sort_reports(reports: &mut [MetricReport]) {
    reports.sort_by(|a, b| {
        (&a.method, a.noise)
            .cmp(&(&b.method, b.noise))
            .then(a.eps.total_cmp(&b.eps))
            .then(a.seed.cmp(&b.seed))
    });
}

pub fn reports_csv(reports: &[MetricReport]) -> String {
    let mut s = String::from("method,noise,eps,seed,f1,mcc,p_at_t\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{:?},{:?},{:?}\n",
            r.method, r.noise, r.eps, r.seed, r.f1.value, r.mcc.value, r.p_at_t.value
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub noise: NoiseKind,
    pub eps: f64,
    pub seeds: usize,
    pub f1: MeanStd,
    pub mcc: MeanStd,
    pub p_at_t: MeanStd,
}

/// Per (method, noise, eps) means and deviations, in report order.
pub fn summarize(reports: &[MetricReport]) -> Vec<SummaryRow> {
    let mut sorted = reports.to_vec();
    sort_reports(&mut sorted);
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let head = &sorted[i];
        let group: Vec<&MetricReport> = sorted[i..]
            .iter()
            .take_while(|r| r.method == head.method && r.noise == head.noise && r.eps == head.eps)
            .collect();
        let pick = |f: fn(&MetricReport) -> f64| MeanStd::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
        rows.push(SummaryRow {
            method: head.method.clone(),
            noise: head.noise,
            eps: head.eps,
            seeds: group.len(),
            f1: pick(|r| r.f1.value),
            mcc: pick(|r| r.mcc.value),
            p_at_t: pick(|r| r.p_at_t.value),
        });
        i += group.len();
    }
    rows
}

pub fn summary_json(reports: &[MetricReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&summarize(reports))?)
}

/// One point of the conformal false-positive curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpCurvePoint {
    pub alpha: f64,
    pub lambda: f64,
    /// Fraction of held-out clean nodes scoring above `lambda`.
    pub empirical_fp: f64,
}

/// Calibrates an FP threshold on `calibration` scores (a `p` fraction of
/// them mislabelled) for each `alpha` and measures how often `clean` scores
/// exceed it. Alphas too small for the calibration size are skipped.
pub fn conformal_fp_curve(calibration: &[f64], p: f64, clean: &[f64], alphas: &[f64]) -> Vec<FpCurvePoint> {
    alphas
        .iter()
        .filter_map(|&alpha| {
            let th = fp_threshold(calibration, p, alpha).ok()?;
            let over = clean.iter().filter(|&&s| s > th.lambda).count();
            Some(FpCurvePoint {
                alpha,
                lambda: th.lambda,
                empirical_fp: over as f64 / clean.len().max(1) as f64,
            })
        })
        .collect()
}

/// Whitespace-separated columns `alpha theoretical empirical lambda`.
pub fn fp_curve_gnuplot(points: &[FpCurvePoint]) -> String {
    let mut s = String::from("# alpha theoretical empirical lambda\n");
    for pt in points {
        s.push_str(&format!("{} {} {} {}\n", pt.alpha, pt.alpha, pt.empirical_fp, pt.lambda));
    }
    s
}

/// FP curve for one trial: the test split is halved at random; one half
/// calibrates, the clean nodes of the other half are evaluated.
pub fn trial_fp_curve(trial: &Trial, eps: f64, seed: u64, alphas: &[f64]) -> Vec<FpCurvePoint> {
    use rand::seq::SliceRandom;
    let mut test = trial.graph.nodes_in(Split::Test);
    test.shuffle(&mut rng::stream(seed, "fp-curve-split"));
    let (cal, held) = test.split_at(test.len() / 2);
    let cal_scores: Vec<f64> = cal.iter().map(|&v| trial.scores[v]).collect();
    let clean: Vec<f64> = held
        .iter()
        .filter(|&&v| !trial.noise.flipped[v])
        .map(|&v| trial.scores[v])
        .collect();
    conformal_fp_curve(&cal_scores, eps, &clean, alphas)
}
