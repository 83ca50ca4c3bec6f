use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::Form;
use crate::feature_map::Kernel;

/// State of training at the end of one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub train_error_rate: f64,
    pub nonzero_weights: usize,
    pub components_per_class: Vec<usize>,
    /// Expected log-likelihood `J`.
    pub j: f64,
    pub resp_iterations: usize,
    pub newton_iterations: usize,
    pub max_alpha_change: f64,
    pub pruned_weights: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub train_error_rate: f64,
    pub nonzero_weights: usize,
    pub components_per_class: Vec<usize>,
    /// Fraction of the initial weights that ended at zero.
    pub weight_reduction_ratio: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub converged: bool,
    pub outer_iterations: usize,
    pub form: Form,
    pub kernel: Kernel,
    pub initial_components: Vec<usize>,
    pub initial_weights: usize,
    pub snapshots: Vec<Snapshot>,
    pub final_metrics: FinalMetrics,
    /// Whether inputs were z-scored before training (set by the caller).
    pub standardized: bool,
    pub warnings: Vec<String>,
    /// Not serialised so that reports of identical runs are byte-identical.
    #[serde(skip)]
    pub wall_clock: Duration,
}
