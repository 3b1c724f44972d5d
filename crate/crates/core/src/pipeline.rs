//! End-to-end detection: transition estimate, synthetic flips, agreement
//! features, detector training and scoring.

use serde::{Deserialize, Serialize};

use crate::base::SoftmaxMatrix;
use crate::detector::{train_detector, DetectorConfig, DetectorModel};
use crate::error::{Error, ModuleContext, Result};
use crate::features::{AgreementFeatures, NeighborhoodSignals};
use crate::graph::{normalized_adjacency, Graph, Split};
use crate::matrix::DenseMatrix;
use crate::noise::{flip_by_transition, sample_synthetic_set, CorruptedLabels};
use crate::rng;
use crate::transition::{estimate, TransitionModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Hops `K` of neighborhood features.
    pub k_hops: usize,
    /// Fraction of validation nodes turned into synthetic mislabels.
    pub synthetic_ratio: f64,
    pub detector: DetectorConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k_hops: 2,
            synthetic_ratio: 0.5,
            detector: DetectorConfig::default(),
            seed: 0,
        }
    }
}

pub struct Detection {
    pub transition: TransitionModel,
    pub synthetic: CorruptedLabels,
    pub detector: DetectorModel,
    /// Inference-time features (`Y_c = Y`).
    pub features: AgreementFeatures,
    /// Mislabel score for every node; excluded nodes score 0.
    pub scores: Vec<f64>,
}

/// Runs detection on `g`'s observed labels with base predictions `p`.
pub fn detect(g: &Graph, p: &SoftmaxMatrix, cfg: &PipelineConfig) -> Result<Detection> {
    if p.num_nodes() != g.num_nodes() || p.num_classes() != g.num_classes() {
        return Err(Error::dimension(
            "detect (softmax shape)",
            format!("{} x {}", g.num_nodes(), g.num_classes()),
            format!("{} x {}", p.num_nodes(), p.num_classes()),
        ));
    }
    let labels = g.dense_labels();
    let val = g.nodes_in(Split::Val);
    if val.is_empty() {
        return Err(Error::InvalidData("validation split is empty".into()));
    }
    let transition = estimate(p, &labels, &val).module("transition_estimator")?;

    let synth_seed = rng::derive_seed(cfg.seed, "pipeline-synthetic", 0);
    let synth_nodes = sample_synthetic_set(&val, cfg.synthetic_ratio, synth_seed).module("noise_injector")?;
    let synthetic =
        flip_by_transition(&labels, &synth_nodes, &transition.conditional, synth_seed).module("noise_injector")?;

    let a = normalized_adjacency(g);
    let y = g.label_matrix();
    let signals = NeighborhoodSignals::new(&a, &y, p, cfg.k_hops).module("agreement_features")?;
    let corrupted: Vec<Option<usize>> = g
        .labels()
        .iter()
        .zip(&synthetic.labels)
        .map(|(l, &c)| l.map(|_| c))
        .collect();
    let y_c = DenseMatrix::one_hot(corrupted, g.num_classes());
    let z_train = signals.features(&y_c).module("agreement_features")?;
    let targets: Vec<bool> = val.iter().map(|&v| synthetic.flipped[v]).collect();
    let detector = train_detector(
        &z_train.select_rows(&val),
        &targets,
        cfg.detector.clone(),
        rng::derive_seed(cfg.seed, "pipeline-detector", 0),
    )
    .module("mislabel_detector")?;

    let features = signals.features(&y).module("agreement_features")?;
    let mut scores = detector.score(features.matrix()).module("mislabel_detector")?;
    for (s, l) in scores.iter_mut().zip(g.labels()) {
        if l.is_none() {
            *s = 0.0;
        }
    }
    Ok(Detection {
        transition,
        synthetic,
        detector,
        features,
        scores,
    })
}
