//! Datasets, CSV ingestion, standardisation and the synthetic mixture
//! generator.

mod csv_io;
mod standardize;
mod synth;

pub use csv_io::{
    available_splits, load_csv, load_csv_with_labels, load_splits, save_csv, LabelColumn,
};
pub use standardize::Standardizer;
pub use synth::{default_gmm_spec, synth_gmm, GmmComponentSpec, GmmSpec, DEFAULT_GMM_SPEC_JSON};

use nalgebra::DMatrix;

use crate::error::{Result, SdgmError};

/// `N × D` inputs (row-major) with class labels in `0..C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    label_names: Vec<String>,
    pub name: Option<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let names = (0..num_classes).map(|c| c.to_string()).collect();
        Self::with_label_names(rows, labels, names)
    }

    pub fn with_label_names(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(SdgmError::Dataset("dataset has no samples".into()));
        }
        if rows.len() != labels.len() {
            return Err(SdgmError::Dataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(SdgmError::Dataset("samples have no features".into()));
        }
        if label_names.is_empty() {
            return Err(SdgmError::Dataset(
                "dataset needs at least one class".into(),
            ));
        }
        let mut inputs = Vec::with_capacity(rows.len() * dim);
        for (n, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(SdgmError::Dataset(format!(
                    "row {n} has {} features, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(SdgmError::Dataset(format!("row {n} has non-finite values")));
            }
            inputs.extend_from_slice(row);
        }
        if let Some(l) = labels.iter().find(|&&l| l >= label_names.len()) {
            return Err(SdgmError::Dataset(format!(
                "label {l} outside 0..{}",
                label_names.len()
            )));
        }
        Ok(Self {
            inputs,
            dim,
            labels,
            label_names,
            name: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.inputs[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// One-hot `N × C` target matrix.
    pub fn targets(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.len(), self.num_classes());
        for (n, &l) in self.labels.iter().enumerate() {
            t[(n, l)] = 1.0;
        }
        t
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub(crate) fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Dataset> {
        let rows = self.rows().map(&mut f).collect();
        let mut out =
            Dataset::with_label_names(rows, self.labels.clone(), self.label_names.clone())?;
        out.name = self.name.clone();
        Ok(out)
    }
}
