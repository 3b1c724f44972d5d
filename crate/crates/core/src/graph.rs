//! Graph representation, text loaders and the symmetric normalized adjacency.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::propagation::NormalizedAdjacency;

/// Marker used in label files for nodes whose label was removed.
pub const EXCLUDED_MARKER: &str = "excluded";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    /// Node kept in the graph but stripped of its label by a review.
    Excluded,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Excluded => EXCLUDED_MARKER,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split tag {other:?} (expected train, val or test)")),
        }
    }
}

/// Undirected node-classification graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_classes: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: Option<DenseMatrix>,
    labels: Vec<Option<usize>>,
    splits: Vec<Split>,
}

/// Input irregularities that were repaired rather than rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadWarnings {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl LoadWarnings {
    pub fn total(&self) -> usize {
        self.self_loops + self.duplicates
    }
}

impl Graph {
    /// Validates and assembles a graph. Edges are symmetrized; self-loops and
    /// repeated pairs are dropped and counted.
    pub fn new(
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        labels: Vec<Option<usize>>,
        splits: Vec<Split>,
        features: Option<DenseMatrix>,
    ) -> Result<(Self, LoadWarnings)> {
        let n = labels.len();
        if splits.len() != n {
            return Err(Error::dimension("Graph::new splits", n, splits.len()));
        }
        if num_classes == 0 {
            return Err(Error::InvalidArgument("graph needs at least one class".into()));
        }
        for (v, (l, s)) in labels.iter().zip(&splits).enumerate() {
            match (l, s) {
                (Some(l), _) if *l >= num_classes => {
                    return Err(Error::InvalidData(format!(
                        "node {v}: label {l} outside [0, {num_classes})"
                    )))
                }
                (None, Split::Excluded) => {}
                (Some(_), Split::Excluded) | (None, _) => {
                    return Err(Error::InvalidData(format!(
                        "node {v}: a label is excluded exactly when the node has no split"
                    )))
                }
                _ => {}
            }
        }
        if let Some(f) = &features {
            if f.rows() != n {
                return Err(Error::dimension("Graph::new features", n, f.rows()));
            }
        }
        let mut warnings = LoadWarnings::default();
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidData(format!(
                    "edge ({u}, {v}) references a node outside [0, {n})"
                )));
            }
            if u == v {
                warnings.self_loops += 1;
                continue;
            }
            if !set.insert((u.min(v), u.max(v))) {
                warnings.duplicates += 1;
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        Ok((
            Self {
                num_classes,
                edges,
                adjacency,
                features,
                labels,
                splits,
            },
            warnings,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Unordered pairs `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn features(&self) -> Option<&DenseMatrix> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    /// Labels with excluded nodes mapped to class 0. Only meaningful at
    /// labelled nodes; every node set handed out by [`Graph::nodes_in`]
    /// is labelled.
    pub fn dense_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.unwrap_or(0)).collect()
    }

    /// One-hot label matrix; excluded nodes give zero rows.
    pub fn label_matrix(&self) -> DenseMatrix {
        DenseMatrix::one_hot(self.labels.iter().copied(), self.num_classes)
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn split(&self, v: usize) -> Split {
        self.splits[v]
    }

    /// Node ids carrying the given split tag, ascending.
    pub fn nodes_in(&self, split: Split) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&v| self.splits[v] == split).collect()
    }

    /// All labelled node ids, ascending.
    pub fn labelled_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&v| self.labels[v].is_some()).collect()
    }

    /// Copy of the graph with different labels on the same structure.
    pub fn with_labels(&self, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != self.num_nodes() {
            return Err(Error::dimension("Graph::with_labels", self.num_nodes(), labels.len()));
        }
        for (v, l) in labels.iter().enumerate() {
            if matches!(l, Some(l) if *l >= self.num_classes) {
                return Err(Error::InvalidData(format!("node {v}: label out of range")));
            }
            if l.is_none() != (self.splits[v] == Split::Excluded) {
                return Err(Error::InvalidData(format!(
                    "node {v}: label presence disagrees with split"
                )));
            }
        }
        Ok(Self {
            labels,
            ..self.clone()
        })
    }

    /// Nodes at exact hop distance `1..=k` from `v`, one ascending list per hop.
    pub fn hop_rings(&self, v: usize, k: usize) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.num_nodes()];
        seen[v] = true;
        let mut frontier = vec![v];
        let mut rings = Vec::with_capacity(k);
        for _ in 0..k {
            let mut next = Vec::new();
            for &u in &frontier {
                for &w in &self.adjacency[u] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            next.sort_unstable();
            rings.push(next.clone());
            frontier = next;
        }
        rings
    }
}

/// `Ã = D^{-1/2} A D^{-1/2}`. Isolated nodes get all-zero rows.
pub fn normalized_adjacency(g: &Graph) -> NormalizedAdjacency {
    NormalizedAdjacency::from_edges(g.num_nodes(), g.edges()).expect("graph edges are deduplicated and loop-free")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Edge list lines `u v`, returned as `(line, u, v)`.
fn parse_edges(path: &Path, text: &str) -> Result<Vec<(usize, usize, usize)>> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let l = l.split('#').next().unwrap_or("");
        let mut it = l.split_whitespace();
        let mut next = |what| -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| Error::parse(path, line, format!("missing {what} node id")))?;
            tok.parse()
                .map_err(|_| Error::parse(path, line, format!("bad node id {tok:?}")))
        };
        let u = next("first")?;
        let v = next("second")?;
        if it.next().is_some() {
            return Err(Error::parse(path, line, "expected exactly two node ids"));
        }
        out.push((line, u, v));
    }
    Ok(out)
}

/// Reads the rows of a two-column `node_id,<column>` CSV with their line numbers.
fn parse_keyed_rows<T>(
    path: &Path,
    column: &str,
    mut parse: impl FnMut(&str) -> std::result::Result<T, String>,
) -> Result<Vec<(usize, usize, T)>> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let header = format!("node_id,{column}");
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == header => {}
        Some((line, h)) => {
            return Err(Error::parse(path, line, format!("expected header {header:?}, found {h:?}")))
        }
        None => return Err(Error::parse(path, 1, format!("missing header {header:?}"))),
    }
    let mut rows = Vec::new();
    for (line, l) in lines {
        let (id, val) = l
            .split_once(',')
            .ok_or_else(|| Error::parse(path, line, "expected two comma-separated fields"))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad node id {id:?}")))?;
        let val = parse(val.trim()).map_err(|m| Error::parse(path, line, m))?;
        rows.push((line, id, val));
    }
    Ok(rows)
}

/// Scatters keyed rows into an `n`-slot table, rejecting ids `>= n` and repeats.
fn scatter<T>(path: &Path, n: usize, rows: Vec<(usize, usize, T)>) -> Result<Vec<Option<T>>> {
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (line, id, val) in rows {
        if id >= n {
            return Err(Error::parse(path, line, format!("node id {id} out of range for {n} nodes")));
        }
        if slots[id].replace(val).is_some() {
            return Err(Error::parse(path, line, format!("duplicate node id {id}")));
        }
    }
    Ok(slots)
}

/// Label CSV. Ids must cover `0..n` exactly; `n` is the row count.
pub fn parse_labels(path: &Path, num_classes: Option<usize>) -> Result<Vec<Option<usize>>> {
    let rows = parse_keyed_rows(path, "label", |s| {
        if s == EXCLUDED_MARKER {
            return Ok(None);
        }
        let l: usize = s.parse().map_err(|_| format!("bad label {s:?}"))?;
        match num_classes {
            Some(c) if l >= c => Err(format!("label {l} outside [0, {c})")),
            _ => Ok(Some(l)),
        }
    })?;
    let n = rows.len();
    Ok(scatter(path, n, rows)?
        .into_iter()
        .map(|s| s.expect("n distinct ids below n"))
        .collect())
}

/// Split CSV aligned to `labels`: every labelled node needs a tag, excluded
/// nodes must not have one.
pub fn parse_splits(path: &Path, labels: &[Option<usize>]) -> Result<Vec<Split>> {
    let rows = parse_keyed_rows(path, "split", Split::from_str)?;
    for (line, id, _) in &rows {
        if labels.get(*id).is_some_and(Option::is_none) {
            return Err(Error::parse(path, *line, format!("node {id} is excluded but has a split")));
        }
    }
    let slots = scatter(path, labels.len(), rows)?;
    slots
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(v, (s, l))| match (s, l) {
            (Some(s), _) => Ok(s),
            (None, None) => Ok(Split::Excluded),
            (None, Some(_)) => Err(Error::parse(path, 0, format!("node {v} has no split tag"))),
        })
        .collect()
}

pub fn parse_features(path: &Path) -> Result<DenseMatrix> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in content_lines(&text) {
        let parsed: std::result::Result<Vec<f64>, _> =
            l.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let row = match parsed {
            Ok(r) => r,
            // tolerate a single header row of column names
            Err(_) if rows.is_empty() && l.split(',').all(|t| t.trim().parse::<f64>().is_err()) => {
                continue
            }
            Err(_) => return Err(Error::parse(path, line, "unparseable feature value")),
        };
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(path, line, "non-finite feature value"));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    path,
                    line,
                    format!("ragged feature row: expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

/// Loads a graph from the text formats described in the README.
///
/// The label file fixes `n`. When `num_classes` is `None` it is inferred
/// as one more than the largest label.
pub fn load_graph(
    edge_path: &Path,
    label_path: &Path,
    split_path: &Path,
    feature_path: Option<&Path>,
    num_classes: Option<usize>,
) -> Result<(Graph, LoadWarnings)> {
    let labels = parse_labels(label_path, num_classes)?;
    let n = labels.len();
    let splits = parse_splits(split_path, &labels)?;
    let edge_text = read(edge_path)?;
    let edges = parse_edges(edge_path, &edge_text)?;
    for (line, u, v) in &edges {
        if *u >= n || *v >= n {
            return Err(Error::parse(
                edge_path,
                *line,
                format!("node id {} out of range for {n} nodes", u.max(v)),
            ));
        }
    }
    let features = feature_path.map(parse_features).transpose()?;
    if let (Some(f), Some(p)) = (&features, feature_path) {
        if f.rows() != n {
            return Err(Error::parse(
                p,
                f.rows(),
                format!("feature file has {} rows, expected {n}", f.rows()),
            ));
        }
    }
    let c = match num_classes {
        Some(c) => c,
        None => labels.iter().flatten().max().map_or(1, |m| m + 1),
    };
    let (g, warnings) = Graph::new(c, edges.into_iter().map(|(_, u, v)| (u, v)), labels, splits, features)?;
    if warnings.total() > 0 {
        log::warn!(
            "{}: dropped {} self-loop(s) and {} duplicate edge(s)",
            edge_path.display(),
            warnings.self_loops,
            warnings.duplicates
        );
    }
    Ok((g, warnings))
}

pub fn labels_csv(labels: &[Option<usize>]) -> String {
    let mut s = String::from("node_id,label\n");
    for (v, l) in labels.iter().enumerate() {
        match l {
            Some(l) => s.push_str(&format!("{v},{l}\n")),
            None => s.push_str(&format!("{v},{EXCLUDED_MARKER}\n")),
        }
    }
    s
}

/// Split CSV; excluded nodes are omitted.
pub fn splits_csv(splits: &[Split]) -> String {
    let mut s = String::from("node_id,split\n");
    for (v, sp) in splits.iter().enumerate() {
        if *sp != Split::Excluded {
            s.push_str(&format!("{v},{sp}\n"));
        }
    }
    s
}

pub fn edges_text(g: &Graph) -> String {
    let mut s = String::new();
    for &(u, v) in g.edges() {
        s.push_str(&format!("{u} {v}\n"));
    }
    s
}

pub fn features_csv(f: &DenseMatrix) -> String {
    let mut s = String::new();
    for row in f.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Writes `edges.txt`, `labels.csv`, `splits.csv` and, when present,
/// `features.csv` into `dir`.
pub fn write_graph(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    put("edges.txt", edges_text(g))?;
    put("labels.csv", labels_csv(g.labels()))?;
    put("splits.csv", splits_csv(g.splits()))?;
    if let Some(f) = g.features() {
        put("features.csv", features_csv(f))?;
    }
    Ok(())
}
