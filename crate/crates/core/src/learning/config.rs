use serde::{Deserialize, Serialize};

use crate::error::{Result, SdgmError};
use crate::feature_map::Kernel;

/// Which parameterisation the weights are trained in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Original,
    #[default]
    Dual,
}

impl std::str::FromStr for Form {
    type Err = SdgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Form::Original),
            "dual" => Ok(Form::Dual),
            other => Err(SdgmError::Config(format!(
                "unknown form `{other}` (expected original|dual)"
            ))),
        }
    }
}

impl std::fmt::Display for Form {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Form::Original => "original",
            Form::Dual => "dual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Initial components per class; a single entry applies to every class.
    pub components: Vec<usize>,
    pub max_outer_iter: usize,
    /// Outer loop stops when the largest relative change of an active α is below this.
    pub alpha_tol: f64,
    /// Responsibility loop stops when the largest |Δr| is below this.
    pub resp_tol: f64,
    pub max_resp_iter: usize,
    pub newton_max_iter: usize,
    /// Newton stops when the gradient's max-norm is below this.
    pub newton_grad_tol: f64,
    pub line_search_shrink: f64,
    pub line_search_max_halvings: usize,
    /// Weights whose α exceeds this are pruned.
    pub alpha_prune_threshold: f64,
    /// Components whose π falls below this are pruned.
    pub pi_prune_threshold: f64,
    /// Initial diagonal jitter, relative to the Hessian's max-norm.
    pub jitter_start: f64,
    pub jitter_max: f64,
    pub seed: u64,
    pub form: Form,
    pub kernel: Kernel,
    pub kmeans_restarts: usize,
    pub max_dual_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            components: vec![2],
            max_outer_iter: 100,
            alpha_tol: 1e-3,
            resp_tol: 1e-4,
            max_resp_iter: 50,
            newton_max_iter: 50,
            newton_grad_tol: 1e-6,
            line_search_shrink: 0.5,
            line_search_max_halvings: 30,
            alpha_prune_threshold: 1e12,
            pi_prune_threshold: 1e-6,
            jitter_start: 1e-8,
            jitter_max: 1e-2,
            seed: 0,
            form: Form::Dual,
            kernel: Kernel::Phi,
            kmeans_restarts: 10,
            max_dual_samples: 2000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_tol", self.alpha_tol),
            ("resp_tol", self.resp_tol),
            ("newton_grad_tol", self.newton_grad_tol),
            ("alpha_prune_threshold", self.alpha_prune_threshold),
            ("pi_prune_threshold", self.pi_prune_threshold),
            ("jitter_start", self.jitter_start),
            ("jitter_max", self.jitter_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SdgmError::Config(format!(
                    "{name} must be positive and finite (got {v})"
                )));
            }
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(SdgmError::Config(
                "line_search_shrink must lie in (0, 1)".into(),
            ));
        }
        if self.jitter_max < self.jitter_start {
            return Err(SdgmError::Config(
                "jitter_max must be at least jitter_start".into(),
            ));
        }
        if self.components.is_empty() || self.components.contains(&0) {
            return Err(SdgmError::Config(
                "components must be a non-empty list of positive counts".into(),
            ));
        }
        let counts = [
            ("max_outer_iter", self.max_outer_iter),
            ("max_resp_iter", self.max_resp_iter),
            ("newton_max_iter", self.newton_max_iter),
            ("kmeans_restarts", self.kmeans_restarts),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(SdgmError::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Initial component count for each of `num_classes` classes.
    pub fn components_for(&self, num_classes: usize) -> Result<Vec<usize>> {
        match self.components.len() {
            1 => Ok(vec![self.components[0]; num_classes]),
            n if n == num_classes => Ok(self.components.clone()),
            n => Err(SdgmError::Config(format!(
                "{n} component counts given for {num_classes} classes"
            ))),
        }
    }
}
