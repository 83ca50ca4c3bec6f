use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdgmError};

/// Mutable training bundle. Weights and precisions are flattened
/// component-major: entry `k * weight_len + f` is weight `f` of component `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub num_classes: usize,
    /// Class of every (initial) component.
    pub component_class: Vec<usize>,
    /// `H` in the original form, `N` in the dual form.
    pub weight_len: usize,
    pub weights: Vec<f64>,
    /// ARD precisions; pruned entries hold [`PRUNED_ALPHA`].
    pub alpha: Vec<f64>,
    pub pi: Vec<f64>,
    /// `N × K` responsibilities `r_nk`, zero outside the sample's class.
    pub resp: DMatrix<f64>,
    pub weight_active: Vec<bool>,
    pub component_active: Vec<bool>,
}

/// Precision assigned to pruned weights.
pub const PRUNED_ALPHA: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveCounts {
    pub weights: usize,
    pub components: usize,
    pub components_per_class: Vec<usize>,
}

impl TrainState {
    pub fn num_components(&self) -> usize {
        self.component_class.len()
    }

    pub fn index(&self, k: usize, f: usize) -> usize {
        k * self.weight_len + f
    }

    pub fn active_components(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_components()).filter(|&k| self.component_active[k])
    }

    /// Active feature positions of component `k` (empty if it is pruned).
    pub fn active_features(&self, k: usize) -> Vec<usize> {
        if !self.component_active[k] {
            return Vec::new();
        }
        (0..self.weight_len)
            .filter(|&f| self.weight_active[self.index(k, f)])
            .collect()
    }

    /// Flattened indices of every trainable weight, component-major.
    pub fn active_indices(&self) -> Vec<usize> {
        self.active_components()
            .flat_map(|k| {
                self.active_features(k)
                    .into_iter()
                    .map(move |f| k * self.weight_len + f)
            })
            .collect()
    }

    pub fn counts(&self) -> ActiveCounts {
        let mut per_class = vec![0; self.num_classes];
        let mut weights = 0;
        for k in self.active_components() {
            per_class[self.component_class[k]] += 1;
            weights += (0..self.weight_len)
                .filter(|&f| {
                    let i = self.index(k, f);
                    self.weight_active[i] && self.weights[i] != 0.0
                })
                .count();
        }
        ActiveCounts {
            weights,
            components: per_class.iter().sum(),
            components_per_class: per_class,
        }
    }

    /// Removes weight `i` from all further computation and stores it as 0.
    pub fn mask_weight(&mut self, i: usize) {
        self.weight_active[i] = false;
        self.weights[i] = 0.0;
        self.alpha[i] = PRUNED_ALPHA;
    }

    pub fn check_invariants(&self, labels: &[usize]) -> Result<()> {
        let total: f64 = self.active_components().map(|k| self.pi[k]).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SdgmError::Training(format!(
                "mixture weights sum to {total}"
            )));
        }
        for (n, &c) in labels.iter().enumerate() {
            let s: f64 = self
                .active_components()
                .filter(|&k| self.component_class[k] == c)
                .map(|k| self.resp[(n, k)])
                .sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(SdgmError::Training(format!(
                    "responsibilities of sample {n} sum to {s}"
                )));
            }
        }
        for i in self.active_indices() {
            if self.alpha[i].is_nan() || self.alpha[i] <= 0.0 {
                return Err(SdgmError::Training(format!(
                    "precision {i} is not positive"
                )));
            }
        }
        Ok(())
    }
}
