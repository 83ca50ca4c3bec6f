//! Precision and mixture-weight re-estimation, and pruning.

use super::config::TrainConfig;
use super::state::TrainState;
use crate::error::{Result, SdgmError};
use crate::learning::problem::TrainingProblem;

/// Squared weights below this are treated as exactly zero.
pub const WEIGHT_SQ_FLOOR: f64 = 1e-300;
/// Numerator used when `1 − αλ` is not positive.
pub const GAMMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaStep {
    Update(f64),
    /// `1 − αλ ≤ 0`; the numerator was clamped to [`GAMMA_FLOOR`].
    Clamped(f64),
    Prune,
}

/// One fixed-point step `α ← (1 − αλ) / ŵ²`.
pub fn alpha_step(alpha: f64, lambda: f64, w: f64, prune_threshold: f64) -> AlphaStep {
    let w2 = w * w;
    if w2 < WEIGHT_SQ_FLOOR {
        return AlphaStep::Prune;
    }
    let gamma = 1.0 - alpha * lambda;
    let (num, clamped) = if gamma > 0.0 {
        (gamma, false)
    } else {
        (GAMMA_FLOOR, true)
    };
    let next = num / w2;
    if next.is_nan() || next > prune_threshold {
        AlphaStep::Prune
    } else if clamped {
        AlphaStep::Clamped(next)
    } else {
        AlphaStep::Update(next)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlphaUpdate {
    /// Largest `|α_new − α_old| / α_old` among weights that stay active.
    pub max_relative_change: f64,
    pub pruned: usize,
    pub clamped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneOutcome {
    pub removed: Vec<usize>,
    /// Components kept only because their class would otherwise be empty.
    pub retained_for_class: Vec<usize>,
}

impl TrainingProblem {
    /// Applies [`alpha_step`] to every active weight given the Laplace
    /// covariance diagonal (ordered as [`TrainState::active_indices`]).
    pub fn update_alpha(
        &self,
        state: &mut TrainState,
        lambda: &[f64],
        config: &TrainConfig,
    ) -> Result<AlphaUpdate> {
        let indices = state.active_indices();
        if indices.len() != lambda.len() {
            return Err(SdgmError::Shape(format!(
                "{} covariance entries for {} active weights",
                lambda.len(),
                indices.len()
            )));
        }
        let mut out = AlphaUpdate::default();
        for (&i, &lam) in indices.iter().zip(lambda) {
            let old = state.alpha[i];
            match alpha_step(old, lam, state.weights[i], config.alpha_prune_threshold) {
                AlphaStep::Prune => {
                    state.mask_weight(i);
                    out.pruned += 1;
                }
                AlphaStep::Update(a) => {
                    out.max_relative_change = out.max_relative_change.max((a - old).abs() / old);
                    state.alpha[i] = a;
                }
                AlphaStep::Clamped(a) => {
                    out.clamped += 1;
                    out.max_relative_change = out.max_relative_change.max((a - old).abs() / old);
                    state.alpha[i] = a;
                }
            }
        }
        Ok(out)
    }

    /// `π_cm ∝ Σ_{n ∈ c} r_ncm`, normalised over active components. This is
    /// `P(m | c) = (1/N_c) Σ_n r_ncm` scaled by the class frequency `N_c / N`.
    pub fn update_pi(&self, state: &mut TrainState) -> Result<()> {
        let mut class_count = vec![0usize; state.num_classes];
        for &c in &self.labels {
            class_count[c] += 1;
        }
        if let Some(c) = class_count.iter().position(|&n| n == 0) {
            return Err(SdgmError::Dataset(format!(
                "class {c} has no training samples"
            )));
        }
        let mut mass = vec![0.0; state.num_components()];
        for (n, &c) in self.labels.iter().enumerate() {
            for k in state.active_components() {
                if state.component_class[k] == c {
                    mass[k] += state.resp[(n, k)];
                }
            }
        }
        let total: f64 = mass.iter().sum();
        for (k, m) in mass.into_iter().enumerate() {
            state.pi[k] = if state.component_active[k] {
                m / total
            } else {
                0.0
            };
        }
        Ok(())
    }

    /// Drops components whose π is below threshold or whose weights are
    /// all masked; a class always keeps its largest-π component. Remaining
    /// π and responsibilities are renormalised.
    pub fn prune(&self, state: &mut TrainState, config: &TrainConfig) -> PruneOutcome {
        let mut out = PruneOutcome::default();
        for c in 0..state.num_classes {
            let ks: Vec<usize> = state
                .active_components()
                .filter(|&k| state.component_class[k] == c)
                .collect();
            let doomed: Vec<usize> = ks
                .iter()
                .copied()
                .filter(|&k| {
                    state.pi[k] < config.pi_prune_threshold || state.active_features(k).is_empty()
                })
                .collect();
            let mut remove = doomed.clone();
            if !ks.is_empty() && doomed.len() == ks.len() {
                let keep =
                    ks.iter()
                        .copied()
                        .fold(ks[0], |b, k| if state.pi[k] > state.pi[b] { k } else { b });
                remove.retain(|&k| k != keep);
                out.retained_for_class.push(keep);
            }
            for k in remove {
                state.component_active[k] = false;
                for f in 0..state.weight_len {
                    let i = state.index(k, f);
                    state.mask_weight(i);
                }
                state.pi[k] = 0.0;
                out.removed.push(k);
            }
        }
        let total: f64 = state.active_components().map(|k| state.pi[k]).sum();
        if total > 0.0 {
            for k in state.active_components().collect::<Vec<_>>() {
                state.pi[k] /= total;
            }
        } else {
            let n = state.active_components().count() as f64;
            for k in state.active_components().collect::<Vec<_>>() {
                state.pi[k] = 1.0 / n;
            }
        }
        if !out.removed.is_empty() {
            for k in &out.removed {
                for n in 0..self.len() {
                    state.resp[(n, *k)] = 0.0;
                }
            }
            for (n, &c) in self.labels.iter().enumerate() {
                let ks: Vec<usize> = state
                    .active_components()
                    .filter(|&k| state.component_class[k] == c)
                    .collect();
                let s: f64 = ks.iter().map(|&k| state.resp[(n, k)]).sum();
                for &k in &ks {
                    state.resp[(n, k)] = if s > 0.0 {
                        state.resp[(n, k)] / s
                    } else {
                        1.0 / ks.len() as f64
                    };
                }
            }
        }
        out
    }
}
