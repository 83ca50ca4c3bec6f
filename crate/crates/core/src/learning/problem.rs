//! The penalised expected log-likelihood and its derivatives.
//!
//! Every component score is linear in an `H`-dimensional feature map
//! `φ̃(x)`: weight `f` of component `k` contributes along the row
//! `R_f ∈ R^H` of a fixed row matrix, so `score_k(x) = (Σ_f w_kf R_f)ᵀ φ̃(x)`.
//! In the original form `R = I_H`; in the dual form `R` is the training
//! feature matrix itself, since `K(X, x) = Φ̃ φ̃(x)` for both kernels.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Form, TrainConfig};
use super::kmeans::kmeans;
use super::state::TrainState;
use crate::data::Dataset;
use crate::error::{Result, SdgmError};
use crate::feature_map::{expanded_dim, Kernel};

/// ln of the smallest positive normal double, used to floor `ln P`.
pub const LOG_FLOOR: f64 = -745.0;

/// Training data prepared for one form and kernel.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    pub(crate) labels: Vec<usize>,
    pub(crate) num_classes: usize,
    pub(crate) form: Form,
    pub(crate) kernel: Kernel,
    /// `N × H` feature map of the training inputs.
    pub(crate) basis: DMatrix<f64>,
    /// `F × H` weight directions.
    pub(crate) rows: DMatrix<f64>,
    pub(crate) inputs: Vec<Vec<f64>>,
}

/// Per-sample component posteriors for a state.
#[derive(Debug, Clone)]
pub struct Posteriors {
    /// `N × K` `ln P(c, m | x_n)`; `-∞` for pruned components.
    pub log_joint: DMatrix<f64>,
    /// `N × K` `P(c, m | x_n)`.
    pub joint: DMatrix<f64>,
}

impl TrainingProblem {
    pub fn new(dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let n = dataset.len();
        if config.form == Form::Dual && n > config.max_dual_samples {
            return Err(SdgmError::Config(format!(
                "dual training is capped at {} samples ({n} given)",
                config.max_dual_samples
            )));
        }
        let h = expanded_dim(dataset.dim())?;
        let kernel = match config.form {
            Form::Original => Kernel::Phi,
            Form::Dual => config.kernel,
        };
        let mut basis = DMatrix::zeros(n, h);
        for (i, row) in dataset.rows().enumerate() {
            let phi = kernel.feature_map(row)?;
            basis.row_mut(i).copy_from_slice(&phi);
        }
        let rows = match config.form {
            Form::Original => DMatrix::identity(h, h),
            Form::Dual => basis.clone(),
        };
        Ok(Self {
            labels: dataset.labels().to_vec(),
            num_classes: dataset.num_classes(),
            form: config.form,
            kernel,
            basis,
            rows,
            inputs: dataset.to_rows(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn weight_len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn basis_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Zero weights, unit precisions, uniform π and hard k-means
    /// responsibilities. Classes with fewer samples than requested
    /// components are reduced to their sample count.
    pub fn init(&self, config: &TrainConfig, warnings: &mut Vec<String>) -> Result<TrainState> {
        let requested = config.components_for(self.num_classes)?;
        let mut members = vec![Vec::new(); self.num_classes];
        for (n, &c) in self.labels.iter().enumerate() {
            members[c].push(n);
        }
        let mut counts = Vec::with_capacity(self.num_classes);
        for (c, m) in requested.iter().enumerate() {
            let available = members[c].len();
            if available == 0 {
                return Err(SdgmError::Dataset(format!(
                    "class {c} has no training samples"
                )));
            }
            if available < *m {
                warnings.push(format!(
                    "class {c} has {available} samples; reducing its components from {m} to {available}"
                ));
                counts.push(available);
            } else {
                counts.push(*m);
            }
        }
        let component_class: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
            .collect();
        let k_total = component_class.len();
        let f = self.weight_len();
        let mut resp = DMatrix::zeros(self.len(), k_total);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut offset = 0;
        for (c, idx) in members.iter().enumerate() {
            let pts: Vec<&[f64]> = idx.iter().map(|&n| self.inputs[n].as_slice()).collect();
            let assign = kmeans(&pts, counts[c], config.kmeans_restarts, &mut rng);
            for (&n, &a) in idx.iter().zip(&assign) {
                resp[(n, offset + a)] = 1.0;
            }
            offset += counts[c];
        }
        Ok(TrainState {
            num_classes: self.num_classes,
            component_class,
            weight_len: f,
            weights: vec![0.0; k_total * f],
            alpha: vec![1.0; k_total * f],
            pi: vec![1.0 / k_total as f64; k_total],
            resp,
            weight_active: vec![true; k_total * f],
            component_active: vec![true; k_total],
        })
    }

    /// A random valid state for derivative checks.
    pub fn random_state(&self, components: &[usize], rng: &mut ChaCha8Rng) -> TrainState {
        let component_class: Vec<usize> = components
            .iter()
            .enumerate()
            .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
            .collect();
        let k_total = component_class.len();
        let f = self.weight_len();
        let scale = match self.form {
            Form::Original => 0.5,
            Form::Dual => 0.5 / f as f64,
        };
        let weights: Vec<f64> = (0..k_total * f)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        let alpha: Vec<f64> = (0..k_total * f)
            .map(|_| rng.random_range(0.5..2.0))
            .collect();
        let weight_active: Vec<bool> = (0..k_total * f)
            .map(|_| rng.random::<f64>() > 0.1)
            .collect();
        let mut pi: Vec<f64> = (0..k_total).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        let mut resp = DMatrix::zeros(self.len(), k_total);
        for (n, &c) in self.labels.iter().enumerate() {
            let ks: Vec<usize> = (0..k_total).filter(|&k| component_class[k] == c).collect();
            let raw: Vec<f64> = ks.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            for (&k, v) in ks.iter().zip(raw) {
                resp[(n, k)] = v / s;
            }
        }
        let mut state = TrainState {
            num_classes: self.num_classes,
            component_class,
            weight_len: f,
            weights,
            alpha,
            pi,
            resp,
            weight_active: vec![true; k_total * f],
            component_active: vec![true; k_total],
        };
        for (i, active) in weight_active.into_iter().enumerate() {
            if !active {
                state.mask_weight(i);
            }
        }
        state
    }

    /// `K × H` effective weights `u_k = Σ_f w_kf R_f` (zero rows for pruned components).
    pub(crate) fn projected(&self, state: &TrainState) -> DMatrix<f64> {
        let h = self.basis_dim();
        let mut u = DMatrix::zeros(state.num_components(), h);
        for k in state.active_components() {
            for f in 0..state.weight_len {
                let i = state.index(k, f);
                let w = state.weights[i];
                if state.weight_active[i] && w != 0.0 {
                    for j in 0..h {
                        u[(k, j)] += w * self.rows[(f, j)];
                    }
                }
            }
        }
        u
    }

    pub fn posteriors(&self, state: &TrainState) -> Posteriors {
        let u = self.projected(state);
        let scores = &self.basis * u.transpose();
        let n = self.len();
        let k_total = state.num_components();
        let mut log_joint = DMatrix::from_element(n, k_total, f64::NEG_INFINITY);
        let mut joint = DMatrix::zeros(n, k_total);
        let active: Vec<usize> = state
            .active_components()
            .filter(|&k| state.pi[k] > 0.0)
            .collect();
        let log_pi: Vec<f64> = state.pi.iter().map(|p| p.ln()).collect();
        for i in 0..n {
            let max = active
                .iter()
                .map(|&k| log_pi[k] + scores[(i, k)])
                .fold(f64::NEG_INFINITY, f64::max);
            let lse = max
                + active
                    .iter()
                    .map(|&k| (log_pi[k] + scores[(i, k)] - max).exp())
                    .sum::<f64>()
                    .ln();
            for &k in &active {
                let l = log_pi[k] + scores[(i, k)] - lse;
                log_joint[(i, k)] = l;
                joint[(i, k)] = l.exp();
            }
        }
        Posteriors { log_joint, joint }
    }

    /// `y_nk = r_nk t_{n,c(k)}`.
    pub(crate) fn targets(&self, state: &TrainState) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.len(), state.num_components());
        for (n, &c) in self.labels.iter().enumerate() {
            for k in state.active_components() {
                if state.component_class[k] == c {
                    y[(n, k)] = state.resp[(n, k)];
                }
            }
        }
        y
    }

    /// `J = Σ_n Σ_c Σ_m r_ncm t_nc ln P(c, m | x_n)`.
    pub fn expected_loglik(&self, state: &TrainState) -> f64 {
        let post = self.posteriors(state);
        self.expected_loglik_with(state, &post)
    }

    pub(crate) fn expected_loglik_with(&self, state: &TrainState, post: &Posteriors) -> f64 {
        let mut j = 0.0;
        for (n, &c) in self.labels.iter().enumerate() {
            for k in state.active_components() {
                if state.component_class[k] == c {
                    let r = state.resp[(n, k)];
                    if r != 0.0 {
                        j += r * post.log_joint[(n, k)].max(LOG_FLOOR);
                    }
                }
            }
        }
        j
    }

    pub fn penalty(&self, state: &TrainState) -> f64 {
        let mut total = 0.0;
        for k in state.active_components() {
            for i in state.index(k, 0)..state.index(k + 1, 0) {
                if state.weight_active[i] {
                    total += 0.5 * state.alpha[i] * state.weights[i] * state.weights[i];
                }
            }
        }
        total
    }

    /// `J − ½ wᵀ A w`.
    pub fn penalized_objective(&self, state: &TrainState) -> f64 {
        self.expected_loglik(state) - self.penalty(state)
    }

    /// Gradient of `J − ½ wᵀ A w` over [`TrainState::active_indices`].
    pub fn penalized_gradient(&self, state: &TrainState) -> Vec<f64> {
        let post = self.posteriors(state);
        self.gradient_with(state, &post, 1.0)
    }

    /// `data_sign` exists so diagnostics can inject a sign fault.
    pub(crate) fn gradient_with(
        &self,
        state: &TrainState,
        post: &Posteriors,
        data_sign: f64,
    ) -> Vec<f64> {
        let residual = self.targets(state) - &post.joint;
        let e = residual.transpose() * &self.basis;
        let mut g = Vec::new();
        for k in state.active_components() {
            for f in state.active_features(k) {
                let i = state.index(k, f);
                let data = self.rows.row(f).dot(&e.row(k));
                g.push(data_sign * data - state.alpha[i] * state.weights[i]);
            }
        }
        g
    }

    /// Dense Hessian of `J − ½ wᵀ A w` over [`TrainState::active_indices`].
    pub fn penalized_hessian(&self, state: &TrainState) -> DMatrix<f64> {
        let post = self.posteriors(state);
        self.hessian_with(state, &post)
    }

    pub(crate) fn hessian_with(&self, state: &TrainState, post: &Posteriors) -> DMatrix<f64> {
        let comps: Vec<usize> = state.active_components().collect();
        let feats: Vec<Vec<usize>> = comps.iter().map(|&k| state.active_features(k)).collect();
        // Z_k = basis · R_{S_k}ᵀ, the N × |S_k| design of component k
        let designs: Vec<DMatrix<f64>> = feats
            .iter()
            .map(|fs| {
                let sel = self.rows.select_rows(fs.iter());
                &self.basis * sel.transpose()
            })
            .collect();
        let offsets: Vec<usize> = feats
            .iter()
            .scan(0, |acc, fs| {
                let o = *acc;
                *acc += fs.len();
                Some(o)
            })
            .collect();
        let total: usize = feats.iter().map(Vec::len).sum();
        let n = self.len();
        let mut hess = DMatrix::zeros(total, total);
        for (a, &k) in comps.iter().enumerate() {
            for (b, &l) in comps.iter().enumerate().skip(a) {
                let coeff = DVector::from_fn(n, |i, _| {
                    let pk = post.joint[(i, k)];
                    let pl = post.joint[(i, l)];
                    -(pk * (if k == l { 1.0 } else { 0.0 } - pl))
                });
                let weighted =
                    DMatrix::from_fn(n, designs[b].ncols(), |i, j| coeff[i] * designs[b][(i, j)]);
                let block = designs[a].transpose() * weighted;
                hess.view_mut((offsets[a], offsets[b]), block.shape())
                    .copy_from(&block);
                if a != b {
                    hess.view_mut((offsets[b], offsets[a]), (block.ncols(), block.nrows()))
                        .copy_from(&block.transpose());
                }
            }
        }
        for (pos, i) in state.active_indices().into_iter().enumerate() {
            hess[(pos, pos)] -= state.alpha[i];
        }
        hess
    }

    /// `Λ = −H⁻¹` at the current weights, via the dense Hessian. Diagonal
    /// jitter starting at `jitter_start · ‖H‖∞` grows tenfold up to
    /// `jitter_max · ‖H‖∞` if the factorisation fails.
    pub fn laplace_covariance(
        &self,
        state: &TrainState,
        config: &TrainConfig,
    ) -> Result<DMatrix<f64>> {
        let neg = -self.penalized_hessian(state);
        invert_spd_with_jitter(neg, config.jitter_start, config.jitter_max)
    }

    /// Recomputes `r_ncm = P(c, m | x_n) / P(c | x_n)` for each sample's own
    /// class and returns the largest absolute change.
    pub fn update_responsibilities(&self, state: &mut TrainState, post: &Posteriors) -> f64 {
        let mut delta: f64 = 0.0;
        for (n, &c) in self.labels.iter().enumerate() {
            let ks: Vec<usize> = state
                .active_components()
                .filter(|&k| state.component_class[k] == c)
                .collect();
            let max = ks
                .iter()
                .map(|&k| post.log_joint[(n, k)])
                .fold(f64::NEG_INFINITY, f64::max);
            let new: Vec<f64> = if max.is_finite() {
                let e: Vec<f64> = ks
                    .iter()
                    .map(|&k| (post.log_joint[(n, k)] - max).exp())
                    .collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / ks.len() as f64; ks.len()]
            };
            for (&k, v) in ks.iter().zip(new) {
                delta = delta.max((state.resp[(n, k)] - v).abs());
                state.resp[(n, k)] = v;
            }
        }
        delta
    }

    /// Fraction of training samples whose arg-max class is wrong.
    pub fn training_error(&self, state: &TrainState, post: &Posteriors) -> f64 {
        let mut wrong = 0;
        for (n, &c) in self.labels.iter().enumerate() {
            let mut class_p = vec![0.0; self.num_classes];
            for k in state.active_components() {
                class_p[state.component_class[k]] += post.joint[(n, k)];
            }
            if crate::model::argmax(&class_p) != c {
                wrong += 1;
            }
        }
        wrong as f64 / self.len() as f64
    }
}

pub(crate) fn invert_spd_with_jitter(
    m: DMatrix<f64>,
    start: f64,
    max: f64,
) -> Result<DMatrix<f64>> {
    let scale = m.abs().row_sum().max().max(f64::MIN_POSITIVE);
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol.inverse());
    }
    let mut jitter = start;
    while jitter <= max * (1.0 + 1e-12) {
        let mut jittered = m.clone();
        for i in 0..m.nrows() {
            jittered[(i, i)] += jitter * scale;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            log::warn!("negative Hessian needed jitter {jitter:e} to factorise");
            return Ok(chol.inverse());
        }
        jitter *= 10.0;
    }
    Err(SdgmError::Training(
        "negative Hessian is singular even after maximum jitter".into(),
    ))
}
