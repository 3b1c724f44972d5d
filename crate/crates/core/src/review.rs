//! Reviewer verdicts and cleaned-dataset export.
//!
//! Verdicts live in an append-only JSON-lines log. A node's effective
//! verdict is its entry with the latest timestamp; equal timestamps go to
//! the later line.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{Error, Result};
use crate::graph::Split;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ClearMislabel,
    LikelyMislabel,
    Ambiguous,
    LikelyOk,
    ClearOk,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::ClearMislabel,
        Verdict::LikelyMislabel,
        Verdict::Ambiguous,
        Verdict::LikelyOk,
        Verdict::ClearOk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ClearMislabel => "clear_mislabel",
            Verdict::LikelyMislabel => "likely_mislabel",
            Verdict::Ambiguous => "ambiguous",
            Verdict::LikelyOk => "likely_ok",
            Verdict::ClearOk => "clear_ok",
        }
    }

    pub fn is_mislabel(self) -> bool {
        matches!(self, Verdict::ClearMislabel | Verdict::LikelyMislabel)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Verdict::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown verdict `{s}`")))
    }
}

/// One line of the verdict log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictEntry {
    pub node_id: usize,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corrected_label: Option<usize>,
    pub reviewer: String,
    pub timestamp: DateTime<FixedOffset>,
}

impl VerdictEntry {
    /// Checks the entry against a report: the node must have a record and a
    /// correction must be a valid class attached to a mislabel verdict.
    pub fn validate(&self, report: &AuditReport) -> Result<()> {
        if !report.records.iter().any(|r| r.node_id == self.node_id) {
            return Err(Error::InvalidArgument(format!(
                "node_id: {} has no audit record",
                self.node_id
            )));
        }
        if let Some(l) = self.corrected_label {
            if l >= report.num_classes {
                return Err(Error::InvalidArgument(format!(
                    "corrected_label: {l} is not below {} classes",
                    report.num_classes
                )));
            }
            if !self.verdict.is_mislabel() {
                return Err(Error::InvalidArgument(format!(
                    "corrected_label: only allowed with clear_mislabel or likely_mislabel, not {}",
                    self.verdict
                )));
            }
        }
        if self.reviewer.trim().is_empty() {
            return Err(Error::InvalidArgument("reviewer: must not be empty".into()));
        }
        Ok(())
    }

    pub fn to_line(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Appends one entry as a single write so a crash leaves either the whole
/// line or, at worst, a torn final line that loading skips.
pub fn append_verdict(path: &Path, entry: &VerdictEntry) -> Result<()> {
    let line = entry.to_line()?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

/// Parses a verdict log. A missing file is an empty log; an unterminated,
/// unparsable last line is treated as a torn write and skipped.
pub fn parse_verdict_log(path: &Path) -> Result<Vec<VerdictEntry>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let terminated = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<VerdictEntry>(line) {
            Ok(e) => out.push(e),
            Err(_) if i + 1 == lines.len() && !terminated => {
                log::warn!("{}: skipping torn final line {}", path.display(), i + 1);
            }
            Err(e) => return Err(Error::parse(path, i + 1, e.to_string())),
        }
    }
    Ok(out)
}

/// Latest verdict per node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EffectiveVerdicts {
    by_node: BTreeMap<usize, VerdictEntry>,
}

impl EffectiveVerdicts {
    pub fn from_entries(entries: impl IntoIterator<Item = VerdictEntry>) -> Self {
        let mut s = Self::default();
        for e in entries {
            s.apply(e);
        }
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_entries(parse_verdict_log(path)?))
    }

    /// Folds in one more entry in log order.
    pub fn apply(&mut self, e: VerdictEntry) {
        match self.by_node.get(&e.node_id) {
            Some(old) if old.timestamp > e.timestamp => {
                log::info!(
                    "node {}: keeping {} from {} over older {}",
                    e.node_id,
                    old.verdict,
                    old.timestamp,
                    e.verdict
                );
            }
            Some(old) => {
                if old.verdict != e.verdict || old.corrected_label != e.corrected_label {
                    log::info!(
                        "node {}: {} by {} supersedes {} by {}",
                        e.node_id,
                        e.verdict,
                        e.reviewer,
                        old.verdict,
                        old.reviewer
                    );
                }
                self.by_node.insert(e.node_id, e);
            }
            None => {
                self.by_node.insert(e.node_id, e);
            }
        }
    }

    pub fn get(&self, node: usize) -> Option<&VerdictEntry> {
        self.by_node.get(&node)
    }

    pub fn len(&self) -> usize {
        self.by_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_node.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VerdictEntry> {
        self.by_node.values()
    }

    pub fn counts(&self) -> BTreeMap<Verdict, usize> {
        let mut m: BTreeMap<Verdict, usize> = Verdict::ALL.iter().map(|&v| (v, 0)).collect();
        for e in self.by_node.values() {
            *m.get_mut(&e.verdict).expect("all verdicts present") += 1;
        }
        m
    }
}

/// Labels and splits after applying verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanedDataset {
    pub labels: Vec<Option<usize>>,
    pub splits: Vec<Split>,
    pub replaced: usize,
    pub excluded: usize,
}

impl CleanedDataset {
    pub fn labels_csv(&self) -> String {
        crate::graph::labels_csv(&self.labels)
    }

    pub fn splits_csv(&self) -> String {
        crate::graph::splits_csv(&self.splits)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("labels.csv", self.labels_csv()), ("splits.csv", self.splits_csv())] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Mislabel verdicts with a correction replace the label. Mislabel verdicts
/// without one, and `ambiguous`, keep the node but drop its label and split
/// membership. The two "ok" verdicts keep the node as is.
pub fn export_clean(
    labels: &[Option<usize>],
    splits: &[Split],
    num_classes: usize,
    verdicts: &EffectiveVerdicts,
) -> Result<CleanedDataset> {
    if labels.len() != splits.len() {
        return Err(Error::dimension("export_clean (splits)", labels.len(), splits.len()));
    }
    let mut out = CleanedDataset {
        labels: labels.to_vec(),
        splits: splits.to_vec(),
        replaced: 0,
        excluded: 0,
    };
    for e in verdicts.iter() {
        let v = e.node_id;
        if v >= labels.len() {
            return Err(Error::InvalidData(format!(
                "verdict for node {v} but the dataset has {} nodes",
                labels.len()
            )));
        }
        if labels[v].is_none() {
            log::warn!("verdict for node {v} ignored: node is already excluded");
            continue;
        }
        match (e.verdict, e.corrected_label) {
            (Verdict::LikelyOk | Verdict::ClearOk, _) => {}
            (verdict, Some(l)) if verdict.is_mislabel() => {
                if l >= num_classes {
                    return Err(Error::InvalidData(format!(
                        "node {v}: corrected label {l} is not below {num_classes} classes"
                    )));
                }
                out.labels[v] = Some(l);
                out.replaced += 1;
            }
            _ => {
                out.labels[v] = None;
                out.splits[v] = Split::Excluded;
                out.excluded += 1;
            }
        }
    }
    Ok(out)
}
