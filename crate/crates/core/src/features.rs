//! Neighborhood-agreement features.
//!
//! Column layout of `Z` (`2K + 1` columns):
//!
//! | column          | content                 |
//! |-----------------|-------------------------|
//! | `0`             | `Y_c ⊖ P`               |
//! | `1 ..= K`       | `Y_c ⊖ S_k P`, k = 1..K |
//! | `K+1 ..= 2K`    | `Y_c ⊖ S_k Y`, k = 1..K |
//!
//! where `⊖` is the row-wise dot product. Neighborhood terms use the
//! observed labels `Y`; only the node's own label enters through `Y_c`, so
//! corrupting one node changes only that node's row.

use crate::base::SoftmaxMatrix;
use crate::error::{Error, Result};
use crate::matrix::{rowwise_dot, DenseMatrix};
use crate::propagation::{NormalizedAdjacency, Propagator};

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementFeatures {
    z: DenseMatrix,
    k_hops: usize,
}

impl AgreementFeatures {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.z
    }

    pub fn k_hops(&self) -> usize {
        self.k_hops
    }

    pub fn num_columns(&self) -> usize {
        2 * self.k_hops + 1
    }

    pub fn row(&self, v: usize) -> &[f64] {
        self.z.row(v)
    }

    pub fn select_rows(&self, nodes: &[usize]) -> DenseMatrix {
        self.z.select_rows(nodes)
    }

    pub fn column_names(&self) -> Vec<String> {
        let k = self.k_hops;
        std::iter::once("self_pred".to_string())
            .chain((1..=k).map(|h| format!("pred_hop{h}")))
            .chain((1..=k).map(|h| format!("label_hop{h}")))
            .collect()
    }

    /// `node_id` followed by the `2K + 1` feature columns.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_id,");
        s.push_str(&self.column_names().join(","));
        s.push('\n');
        for (v, row) in self.z.row_iter().enumerate() {
            s.push_str(&v.to_string());
            for x in row {
                s.push_str(&format!(",{x:?}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Propagated label and prediction signals, reusable across several
/// corrupted label matrices.
pub struct NeighborhoodSignals {
    pred_hops: Vec<DenseMatrix>,
    label_hops: Vec<DenseMatrix>,
    p: DenseMatrix,
}

impl NeighborhoodSignals {
    pub fn new(a_norm: &NormalizedAdjacency, y: &DenseMatrix, p: &SoftmaxMatrix, k_max: usize) -> Result<Self> {
        if y.shape() != p.matrix().shape() {
            return Err(Error::dimension(
                "agreement features (Y vs P)",
                format!("{:?}", p.matrix().shape()),
                format!("{:?}", y.shape()),
            ));
        }
        let prop = Propagator::new(a_norm, k_max)?;
        Ok(Self {
            pred_hops: prop.all_hops(p.matrix())?,
            label_hops: prop.all_hops(y)?,
            p: p.matrix().clone(),
        })
    }

    /// Assembles `Z` for one (possibly corrupted) one-hot label matrix.
    pub fn features(&self, y_c: &DenseMatrix) -> Result<AgreementFeatures> {
        if y_c.shape() != self.p.shape() {
            return Err(Error::dimension(
                "agreement features (Y_c)",
                format!("{:?}", self.p.shape()),
                format!("{:?}", y_c.shape()),
            ));
        }
        let k = self.pred_hops.len();
        let mut columns = Vec::with_capacity(2 * k + 1);
        columns.push(rowwise_dot(y_c, &self.p)?);
        for hop in &self.pred_hops {
            columns.push(rowwise_dot(y_c, hop)?);
        }
        for hop in &self.label_hops {
            columns.push(rowwise_dot(y_c, hop)?);
        }
        let n = y_c.rows();
        let width = columns.len();
        let mut z = DenseMatrix::zeros(n, width);
        for (j, col) in columns.iter().enumerate() {
            for (v, &x) in col.iter().enumerate() {
                z.set(v, j, x);
            }
        }
        Ok(AgreementFeatures { z, k_hops: k })
    }
}

/// Builds `Z` in one call. At inference time pass `y_c == y`.
pub fn build_features(
    a_norm: &NormalizedAdjacency,
    y: &DenseMatrix,
    y_c: &DenseMatrix,
    p: &SoftmaxMatrix,
    k_max: usize,
) -> Result<AgreementFeatures> {
    NeighborhoodSignals::new(a_norm, y, p, k_max)?.features(y_c)
}
