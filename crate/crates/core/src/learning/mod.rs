//! Sparse Bayesian training of the SDGM.

mod ard;
mod config;
mod curvature;
mod fit;
mod kmeans;
mod newton;
mod problem;
mod report;
mod state;

pub use ard::{alpha_step, AlphaStep, AlphaUpdate, PruneOutcome, GAMMA_FLOOR, WEIGHT_SQ_FLOOR};
pub use config::{Form, TrainConfig};
pub use fit::{build_model, fit, fit_with_progress};
pub use kmeans::kmeans;
pub use newton::NewtonOutcome;
pub use problem::{Posteriors, TrainingProblem, LOG_FLOOR};
pub use report::{FinalMetrics, Snapshot, TrainReport};
pub use state::{ActiveCounts, TrainState, PRUNED_ALPHA};
