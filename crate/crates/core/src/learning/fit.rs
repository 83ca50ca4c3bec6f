use std::time::Instant;

use super::config::{Form, TrainConfig};
use super::problem::TrainingProblem;
use super::report::{FinalMetrics, Snapshot, TrainReport};
use super::state::TrainState;
use crate::data::Dataset;
use crate::error::Result;
use crate::model::{Component, ModelForm, SdgmModel};

/// Trains an SDGM with the nested loops of the sparse Bayesian learning
/// algorithm: Newton over `w` inside a responsibility loop inside the
/// evidence loop over `α` and `π`.
pub fn fit(dataset: &Dataset, config: &TrainConfig) -> Result<(SdgmModel, TrainReport)> {
    fit_with_progress(dataset, config, |_| {})
}

pub fn fit_with_progress(
    dataset: &Dataset,
    config: &TrainConfig,
    progress: impl FnMut(&Snapshot),
) -> Result<(SdgmModel, TrainReport)> {
    let (problem, state, report) = train(dataset, config, progress)?;
    Ok((build_model(&problem, &state)?, report))
}

/// [`fit_with_progress`] without the final model conversion.
pub(crate) fn train(
    dataset: &Dataset,
    config: &TrainConfig,
    mut progress: impl FnMut(&Snapshot),
) -> Result<(TrainingProblem, TrainState, TrainReport)> {
    let started = Instant::now();
    let problem = TrainingProblem::new(dataset, config)?;
    let mut warnings = Vec::new();
    let mut state = problem.init(config, &mut warnings)?;
    let initial_components = state.counts().components_per_class;
    let initial_weights = state.weights.len();
    let mut snapshots = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_outer_iter {
        let mut newton_iterations = 0;
        let mut resp_iterations = 0;
        for _ in 0..config.max_resp_iter {
            resp_iterations += 1;
            let outcome = problem.newton_maximize(&mut state, config)?;
            newton_iterations += outcome.iterations;
            if let Some(w) = outcome.warning {
                log::warn!("outer iteration {iteration}: {w}");
                warnings.push(format!("outer iteration {iteration}: {w}"));
            }
            let post = problem.posteriors(&state);
            if problem.update_responsibilities(&mut state, &post) < config.resp_tol {
                break;
            }
        }
        let lambda = problem.laplace_diagonal(&state)?;
        let alpha = problem.update_alpha(&mut state, &lambda, config)?;
        if alpha.clamped > 0 {
            warnings.push(format!(
                "outer iteration {iteration}: {} precision updates had 1 - alpha*lambda <= 0 and were clamped",
                alpha.clamped
            ));
        }
        problem.update_pi(&mut state)?;
        let pruned = problem.prune(&mut state, config);
        if !pruned.retained_for_class.is_empty() {
            warnings.push(format!(
                "outer iteration {iteration}: kept components {:?} so that no class is left empty",
                pruned.retained_for_class
            ));
        }

        let post = problem.posteriors(&state);
        let counts = state.counts();
        let snapshot = Snapshot {
            iteration,
            train_error_rate: problem.training_error(&state, &post),
            nonzero_weights: counts.weights,
            components_per_class: counts.components_per_class,
            j: problem.expected_loglik_with(&state, &post),
            resp_iterations,
            newton_iterations,
            max_alpha_change: alpha.max_relative_change,
            pruned_weights: alpha.pruned,
        };
        progress(&snapshot);
        snapshots.push(snapshot);
        if alpha.max_relative_change < config.alpha_tol
            && alpha.pruned == 0
            && pruned.removed.is_empty()
        {
            converged = true;
            break;
        }
    }

    let last = snapshots.last().expect("at least one outer iteration");
    let final_metrics = FinalMetrics {
        train_error_rate: last.train_error_rate,
        nonzero_weights: last.nonzero_weights,
        components_per_class: last.components_per_class.clone(),
        weight_reduction_ratio: 1.0 - last.nonzero_weights as f64 / initial_weights as f64,
        j: last.j,
    };
    if !converged {
        warnings.push(format!(
            "precisions did not converge within {} outer iterations",
            config.max_outer_iter
        ));
    }
    let report = TrainReport {
        converged,
        outer_iterations: snapshots.len(),
        form: problem.form(),
        kernel: problem.kernel(),
        initial_components,
        initial_weights,
        snapshots,
        final_metrics,
        standardized: false,
        warnings,
        wall_clock: started.elapsed(),
    };
    Ok((problem, state, report))
}

/// Converts a training state into a model, dropping pruned components and,
/// in the dual form, reference samples no surviving weight uses.
pub fn build_model(problem: &TrainingProblem, state: &TrainState) -> Result<SdgmModel> {
    let comps: Vec<usize> = state.active_components().collect();
    let total_pi: f64 = comps.iter().map(|&k| state.pi[k]).sum();
    let weights_of = |k: usize, keep: &[usize]| -> Vec<f64> {
        keep.iter()
            .map(|&f| {
                let i = state.index(k, f);
                if state.weight_active[i] {
                    state.weights[i]
                } else {
                    0.0
                }
            })
            .collect()
    };
    let (form, keep): (ModelForm, Vec<usize>) = match problem.form() {
        Form::Original => (
            ModelForm::Original {
                input_dim: problem.inputs[0].len(),
            },
            (0..state.weight_len).collect(),
        ),
        Form::Dual => {
            let mut used: Vec<usize> = (0..state.weight_len)
                .filter(|&f| {
                    comps
                        .iter()
                        .any(|&k| state.weights[state.index(k, f)] != 0.0)
                })
                .collect();
            if used.is_empty() {
                used.push(0);
            }
            let reference = used.iter().map(|&f| problem.inputs[f].clone()).collect();
            (
                ModelForm::Dual {
                    reference,
                    kernel: problem.kernel(),
                },
                used,
            )
        }
    };
    let components = comps
        .iter()
        .map(|&k| Component {
            class: state.component_class[k],
            pi: state.pi[k] / total_pi,
            weights: weights_of(k, &keep),
        })
        .collect();
    SdgmModel::new(state.num_classes, form, components)
}
