//! Finite-difference checks of the analytic gradient and Hessian.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, SdgmError};
use crate::learning::{TrainConfig, TrainState, TrainingProblem};

pub const MAX_GRADCHECK_SAMPLES: usize = 200;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const HESSIAN_TOLERANCE: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;

/// Faults that can be injected to confirm the check detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    SignFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub states: usize,
    pub max_weights_per_state: usize,
    pub max_relative_gradient_error: f64,
    pub max_relative_hessian_error: f64,
    pub gradient_tolerance: f64,
    pub hessian_tolerance: f64,
    pub fault: Fault,
    pub passed: bool,
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `J − ½ wᵀ A w` along each active weight.
pub fn fd_gradient(problem: &TrainingProblem, state: &TrainState, step: f64) -> Vec<f64> {
    let mut probe = state.clone();
    state
        .active_indices()
        .into_iter()
        .map(|i| {
            let w = state.weights[i];
            probe.weights[i] = w + step;
            let up = problem.penalized_objective(&probe);
            probe.weights[i] = w - step;
            let down = problem.penalized_objective(&probe);
            probe.weights[i] = w;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Central differences of the analytic gradient.
pub fn fd_hessian(
    problem: &TrainingProblem,
    state: &TrainState,
    step: f64,
    sign: f64,
) -> DMatrix<f64> {
    let idx = state.active_indices();
    let mut probe = state.clone();
    let mut out = DMatrix::zeros(idx.len(), idx.len());
    for (col, &i) in idx.iter().enumerate() {
        let w = state.weights[i];
        probe.weights[i] = w + step;
        let up = problem.gradient_with(&probe, &problem.posteriors(&probe), sign);
        probe.weights[i] = w - step;
        let down = problem.gradient_with(&probe, &problem.posteriors(&probe), sign);
        probe.weights[i] = w;
        for row in 0..idx.len() {
            out[(row, col)] = (up[row] - down[row]) / (2.0 * step);
        }
    }
    out
}

/// Compares analytic and finite-difference derivatives at `n_states`
/// random states (component counts from `config`).
pub fn gradcheck(
    dataset: &Dataset,
    config: &TrainConfig,
    n_states: usize,
    seed: u64,
    fault: Fault,
) -> Result<GradCheckReport> {
    if dataset.len() > MAX_GRADCHECK_SAMPLES {
        return Err(SdgmError::Config(format!(
            "gradcheck is limited to {MAX_GRADCHECK_SAMPLES} samples ({} given)",
            dataset.len()
        )));
    }
    let problem = TrainingProblem::new(dataset, config)?;
    let counts = dataset.class_counts();
    let components: Vec<usize> = config
        .components_for(dataset.num_classes())?
        .into_iter()
        .zip(&counts)
        .map(|(m, &n)| m.min(n.max(1)))
        .collect();
    let sign = match fault {
        Fault::None => 1.0,
        Fault::SignFlip => -1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        states: n_states,
        max_weights_per_state: 0,
        max_relative_gradient_error: 0.0,
        max_relative_hessian_error: 0.0,
        gradient_tolerance: GRADIENT_TOLERANCE,
        hessian_tolerance: HESSIAN_TOLERANCE,
        fault,
        passed: false,
    };
    for _ in 0..n_states {
        let state = problem.random_state(&components, &mut rng);
        let post = problem.posteriors(&state);
        let analytic = problem.gradient_with(&state, &post, sign);
        let numeric = fd_gradient(&problem, &state, FD_STEP);
        report.max_weights_per_state = report.max_weights_per_state.max(analytic.len());
        report.max_relative_gradient_error = report
            .max_relative_gradient_error
            .max(relative_error(&analytic, &numeric));
        let hess = problem.hessian_with(&state, &post);
        let fd_h = fd_hessian(&problem, &state, FD_STEP, sign);
        let fd_sym = (&fd_h + fd_h.transpose()) * 0.5;
        report.max_relative_hessian_error = report
            .max_relative_hessian_error
            .max(relative_error(hess.as_slice(), fd_sym.as_slice()));
    }
    report.passed = report.max_relative_gradient_error < GRADIENT_TOLERANCE
        && report.max_relative_hessian_error < HESSIAN_TOLERANCE;
    Ok(report)
}
