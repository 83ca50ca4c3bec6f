use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Result, SdgmError};

/// Per-dimension z-scoring with statistics taken from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns whose training spread was zero; their std is forced to 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constant_columns: Vec<usize>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Self {
        let n = train.len() as f64;
        let d = train.dim();
        let mut mean = vec![0.0; d];
        for row in train.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in train.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut constant_columns = Vec::new();
        let std = var
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    log::warn!("column {j} is constant on the training data; leaving it unscaled");
                    constant_columns.push(j);
                    1.0
                }
            })
            .collect();
        Self {
            mean,
            std,
            constant_columns,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.mean.len() {
            return Err(SdgmError::Shape(format!(
                "input has dimension {}, standardizer expects {}",
                x.len(),
                self.mean.len()
            )));
        }
        Ok(())
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| v * s + m)
            .collect())
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        self.check(ds.row(0))?;
        ds.map_rows(|row| self.transform(row).expect("dimension checked"))
    }
}
