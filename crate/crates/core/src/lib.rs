//! Sparse discriminative Gaussian mixture (SDGM) classification.
//!
//! A discriminative Gaussian mixture whose per-component weights carry
//! automatic-relevance-determination priors. Training alternates Newton
//! maximisation of the penalised expected log-likelihood, a Laplace
//! approximation of the weight posterior, evidence updates of the
//! precisions and mixture weights, and pruning of weights and components.
//!
//! * [`feature_map`]: quadratic expansion and polynomial kernels.
//! * [`model`]: posteriors, Gaussian collapsing, the logistic reduction.
//! * [`learning`]: the training loop.
//! * [`data`]: CSV ingestion, standardisation, synthetic mixtures.
//! * [`persist`]: model files.
//! * [`diagnostics`]: finite-difference derivative checks.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod feature_map;
pub mod learning;
pub mod model;
pub mod persist;

pub use data::{Dataset, GmmSpec, LabelColumn, Standardizer};
pub use error::{Result, SdgmError};
pub use feature_map::Kernel;
pub use learning::{
    fit, fit_with_progress, Form, TrainConfig, TrainReport, TrainState, TrainingProblem,
};
pub use model::{Component, GaussianComponent, ModelForm, PosteriorResult, SdgmModel};
pub use persist::ModelFile;
