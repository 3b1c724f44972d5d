//! Full-graph audits: run detection, apply a threshold policy and rank every
//! labelled node by mislabel score.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::base::SoftmaxMatrix;
use crate::conformal::{fn_threshold, fp_threshold, ConformalThreshold};
use crate::detector::{bayes_threshold, DetectorModel, DEFAULT_THRESHOLD};
use crate::error::{Error, ModuleContext, Result};
use crate::graph::Graph;
use crate::pipeline::{detect, PipelineConfig};
use crate::transition::TransitionModel;

pub const REPORT_SCHEMA: u32 = 1;

/// How scores become flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// Flag when `score > x`.
    Fixed(f64),
    /// Flag when `score > 1 − rate` for an expected mislabel rate.
    Bayes(f64),
    /// False-positive guarantee at level `alpha` with mislabel fraction `p`.
    ConformalFp { alpha: f64, p: f64 },
    /// False-negative guarantee at level `alpha` with mislabel fraction `p`.
    ConformalFn { alpha: f64, p: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Fixed(DEFAULT_THRESHOLD)
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Fixed(x) => write!(f, "fixed:{x}"),
            ThresholdPolicy::Bayes(r) => write!(f, "bayes:{r}"),
            ThresholdPolicy::ConformalFp { alpha, p } => write!(f, "conformal-fp:{alpha},{p}"),
            ThresholdPolicy::ConformalFn { alpha, p } => write!(f, "conformal-fn:{alpha},{p}"),
        }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidArgument(format!(
                "threshold policy `{s}`: expected fixed:<x>, bayes:<rate>, conformal-fp:<alpha>,<p> or conformal-fn:<alpha>,<p>"
            ))
        };
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let pair = || -> Result<(f64, f64)> {
            let (a, p) = arg.split_once(',').ok_or_else(bad)?;
            Ok((num(a)?, num(p)?))
        };
        let policy = match kind {
            "fixed" => ThresholdPolicy::Fixed(num(arg)?),
            "bayes" => ThresholdPolicy::Bayes(num(arg)?),
            "conformal-fp" => {
                let (alpha, p) = pair()?;
                ThresholdPolicy::ConformalFp { alpha, p }
            }
            "conformal-fn" => {
                let (alpha, p) = pair()?;
                ThresholdPolicy::ConformalFn { alpha, p }
            }
            _ => return Err(bad()),
        };
        if let ThresholdPolicy::Fixed(x) = policy {
            if !x.is_finite() {
                return Err(bad());
            }
        }
        Ok(policy)
    }
}

impl Serialize for ThresholdPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ThresholdPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A policy bound to concrete scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedThreshold {
    pub policy: ThresholdPolicy,
    /// Score cutoff for fixed, prior-ratio and false-positive policies;
    /// `λ` on modified scores for the false-negative policy.
    pub cutoff: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conformal: Option<ConformalThreshold>,
}

impl ResolvedThreshold {
    /// Conformal policies calibrate on `scores`.
    pub fn resolve(policy: ThresholdPolicy, scores: &[f64]) -> Result<Self> {
        let (cutoff, conformal) = match policy {
            ThresholdPolicy::Fixed(x) => (x, None),
            ThresholdPolicy::Bayes(rate) => (bayes_threshold(rate)?, None),
            ThresholdPolicy::ConformalFp { alpha, p } => {
                let t = fp_threshold(scores, p, alpha)?;
                (t.lambda, Some(t))
            }
            ThresholdPolicy::ConformalFn { alpha, p } => {
                let t = fn_threshold(scores, p, alpha)?;
                (t.lambda, Some(t))
            }
        };
        Ok(Self {
            policy,
            cutoff,
            conformal,
        })
    }

    pub fn flags(&self, score: f64) -> bool {
        match &self.conformal {
            Some(t) => t.flags(score),
            None => score > self.cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: usize,
    pub given_label: usize,
    pub mislabel_score: f64,
    pub flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub suggested_label: Option<usize>,
}

/// Settings recorded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub k_hops: usize,
    pub synthetic_ratio: f64,
    pub seed: u64,
    /// Where `P` came from: a file path or `trained`.
    pub softmax_source: String,
    pub threshold: ResolvedThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema: u32,
    pub dataset: String,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub config: AuditConfig,
    pub transition: TransitionModel,
    pub detector_epochs: usize,
    /// Labelled nodes by descending score; ties by ascending id.
    pub records: Vec<NodeRecord>,
}

impl AuditReport {
    pub fn num_flagged(&self) -> usize {
        self.records.iter().filter(|r| r.flagged).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: Self = serde_json::from_str(&text)?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::InvalidData(format!(
                "{}: unsupported report schema {}",
                path.display(),
                report.schema
            )));
        }
        Ok(report)
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mislabel_score).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    pub dataset: String,
    pub pipeline: PipelineConfig,
    pub threshold: ThresholdPolicy,
    pub softmax_source: String,
}

/// An audit and the trained detector behind it.
pub struct Audit {
    pub report: AuditReport,
    pub detector: DetectorModel,
}

/// Runs detection on `g` with base predictions `p`. Conformal policies are
/// calibrated on the scores of all labelled nodes.
pub fn run_audit(g: &Graph, p: &SoftmaxMatrix, opts: &AuditOptions) -> Result<Audit> {
    let detection = detect(g, p, &opts.pipeline)?;
    let labelled = g.labelled_nodes();
    let labelled_scores: Vec<f64> = labelled.iter().map(|&v| detection.scores[v]).collect();
    let threshold = ResolvedThreshold::resolve(opts.threshold, &labelled_scores).module("conformal")?;
    let mut records: Vec<NodeRecord> = labelled
        .iter()
        .zip(&labelled_scores)
        .map(|(&v, &s)| {
            let flagged = threshold.flags(s);
            NodeRecord {
                node_id: v,
                given_label: g.label(v).expect("labelled node"),
                mislabel_score: s,
                flagged,
                suggested_label: flagged.then(|| p.argmax(v)),
            }
        })
        .collect();
    sort_records(&mut records);
    let report = AuditReport {
        schema: REPORT_SCHEMA,
        dataset: opts.dataset.clone(),
        num_nodes: g.num_nodes(),
        num_classes: g.num_classes(),
        config: AuditConfig {
            k_hops: opts.pipeline.k_hops,
            synthetic_ratio: opts.pipeline.synthetic_ratio,
            seed: opts.pipeline.seed,
            softmax_source: opts.softmax_source.clone(),
            threshold,
        },
        transition: detection.transition,
        detector_epochs: detection.detector.epochs_run,
        records,
    };
    Ok(Audit {
        report,
        detector: detection.detector,
    })
}

pub fn sort_records(records: &mut [NodeRecord]) {
    records.sort_by(|a, b| {
        b.mislabel_score
            .total_cmp(&a.mislabel_score)
            .then(a.node_id.cmp(&b.node_id))
    });
}
