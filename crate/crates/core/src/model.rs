//! The SDGM posterior model.
//!
//! Each surviving component `(c, m)` carries a mixture weight `π_cm` and a
//! weight vector. In the original form the weight vector lives on the
//! quadratic expansion of the input and its score is `w_cmᵀ φ(x)`; in the
//! dual form it lives on a stored reference set and its score is
//! `ψ_cmᵀ K(X, x)`. Posteriors are a softmax of `ln π_cm + score_cm` over
//! all components, evaluated with max-subtraction.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdgmError};
use crate::feature_map::{self, dot, expand, expanded_dim, Kernel};

const PI_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum ModelForm {
    Original {
        input_dim: usize,
    },
    Dual {
        reference: Vec<Vec<f64>>,
        kernel: Kernel,
    },
}

impl ModelForm {
    pub fn input_dim(&self) -> usize {
        match self {
            ModelForm::Original { input_dim } => *input_dim,
            ModelForm::Dual { reference, .. } => reference.first().map_or(0, Vec::len),
        }
    }

    /// Required length of every component weight vector.
    pub fn weight_len(&self) -> Result<usize> {
        match self {
            ModelForm::Original { input_dim } => expanded_dim(*input_dim),
            ModelForm::Dual { reference, .. } => Ok(reference.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub class: usize,
    pub pi: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdgmModel {
    num_classes: usize,
    form: ModelForm,
    components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    /// `P(c | x)` for every class.
    pub class_posteriors: Vec<f64>,
    /// `P(c, m | x)` in model component order.
    pub joint_posteriors: Vec<f64>,
    /// Class of each entry of `joint_posteriors`.
    pub component_class: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityMetrics {
    pub nonzero_weights: usize,
    pub components_per_class: Vec<usize>,
}

impl SdgmModel {
    pub fn new(num_classes: usize, form: ModelForm, components: Vec<Component>) -> Result<Self> {
        if num_classes == 0 {
            return Err(SdgmError::InvalidModel(
                "model needs at least one class".into(),
            ));
        }
        if form.input_dim() == 0 {
            return Err(SdgmError::InvalidModel(
                "input dimension must be at least 1".into(),
            ));
        }
        if let ModelForm::Dual { reference, .. } = &form {
            let d = form.input_dim();
            if reference.iter().any(|r| r.len() != d) {
                return Err(SdgmError::InvalidModel(
                    "reference samples have ragged dimensions".into(),
                ));
            }
            if reference.iter().flatten().any(|v| !v.is_finite()) {
                return Err(SdgmError::InvalidModel(
                    "reference samples must be finite".into(),
                ));
            }
        }
        let len = form.weight_len()?;
        let mut per_class = vec![0usize; num_classes];
        for (i, comp) in components.iter().enumerate() {
            if comp.class >= num_classes {
                return Err(SdgmError::InvalidModel(format!(
                    "component {i} has class {} but the model has {num_classes} classes",
                    comp.class
                )));
            }
            if comp.weights.len() != len {
                return Err(SdgmError::InvalidModel(format!(
                    "component {i} has {} weights, expected {len}",
                    comp.weights.len()
                )));
            }
            if !(0.0..=1.0).contains(&comp.pi) {
                return Err(SdgmError::InvalidModel(format!(
                    "component {i} has mixture weight {} outside [0, 1]",
                    comp.pi
                )));
            }
            if comp.weights.iter().any(|w| !w.is_finite()) {
                return Err(SdgmError::InvalidModel(format!(
                    "component {i} has non-finite weights"
                )));
            }
            per_class[comp.class] += 1;
        }
        if let Some(c) = per_class.iter().position(|&n| n == 0) {
            return Err(SdgmError::InvalidModel(format!(
                "class {c} has no components"
            )));
        }
        let total: f64 = components.iter().map(|c| c.pi).sum();
        if total == 0.0 {
            return Err(SdgmError::InvalidModel(
                "all mixture weights are zero".into(),
            ));
        }
        if (total - 1.0).abs() > PI_SUM_TOL {
            return Err(SdgmError::InvalidModel(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            num_classes,
            form,
            components,
        })
    }

    /// Original-form model whose components are the collapsed Gaussians, with
    /// each Gaussian's prior weight used as `π_cm`.
    pub fn from_gaussians(
        num_classes: usize,
        gaussians: &[(usize, GaussianComponent)],
    ) -> Result<Self> {
        let dim = gaussians
            .first()
            .map(|(_, g)| g.dim())
            .ok_or_else(|| SdgmError::InvalidModel("no components".into()))?;
        let components = gaussians
            .iter()
            .map(|(class, g)| {
                Ok(Component {
                    class: *class,
                    pi: g.weight,
                    weights: collapse_gaussian(g)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            num_classes,
            ModelForm::Original { input_dim: dim },
            components,
        )
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.form.input_dim()
    }

    pub fn form(&self) -> &ModelForm {
        &self.form
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn components_per_class(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for c in &self.components {
            counts[c.class] += 1;
        }
        counts
    }

    fn component_position(&self, class: usize, m: usize) -> Result<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, comp)| comp.class == class)
            .nth(m)
            .map(|(i, _)| i)
            .ok_or_else(|| SdgmError::Index(format!("no component {m} in class {class}")))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(SdgmError::Shape(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SdgmError::InvalidInput(
                "input contains non-finite values".into(),
            ));
        }
        Ok(())
    }

    /// Basis the component weights act on: `φ(x)` or `K(X, x)`.
    fn basis(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        match &self.form {
            ModelForm::Original { .. } => expand(x),
            ModelForm::Dual { reference, kernel } => {
                feature_map::gram_row(*kernel, reference, x).map(|g| g.0)
            }
        }
    }

    /// Log-domain unnormalised scores of every component.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let basis = self.basis(x)?;
        Ok(self
            .components
            .iter()
            .map(|c| dot(&c.weights, &basis))
            .collect())
    }

    /// Score of the `m`-th surviving component of class `class`.
    pub fn component_score(&self, class: usize, m: usize, x: &[f64]) -> Result<f64> {
        let k = self.component_position(class, m)?;
        let basis = self.basis(x)?;
        Ok(dot(&self.components[k].weights, &basis))
    }

    pub fn posterior(&self, x: &[f64]) -> Result<PosteriorResult> {
        let scores = self.scores(x)?;
        let logits: Vec<f64> = self
            .components
            .iter()
            .zip(&scores)
            .map(|(c, s)| {
                if c.pi > 0.0 {
                    c.pi.ln() + s
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(SdgmError::InvalidModel(
                "no component has positive mixture weight".into(),
            ));
        }
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let joint: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let mut class_posteriors = vec![0.0; self.num_classes];
        for (comp, p) in self.components.iter().zip(&joint) {
            class_posteriors[comp.class] += p;
        }
        Ok(PosteriorResult {
            class_posteriors,
            joint_posteriors: joint,
            component_class: self.components.iter().map(|c| c.class).collect(),
        })
    }

    /// Arg-max class; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let post = self.posterior(x)?;
        Ok(argmax(&post.class_posteriors))
    }

    /// Counts exactly-nonzero weights and, per class, components that still
    /// own at least one nonzero weight.
    pub fn sparsity_metrics(&self) -> SparsityMetrics {
        let mut components_per_class = vec![0; self.num_classes];
        let mut nonzero_weights = 0;
        for comp in &self.components {
            let nz = comp.weights.iter().filter(|w| **w != 0.0).count();
            if nz > 0 {
                components_per_class[comp.class] += 1;
                nonzero_weights += nz;
            }
        }
        SparsityMetrics {
            nonzero_weights,
            components_per_class,
        }
    }

    /// Rewrites a dual model trained with the `phi` kernel in the original
    /// form using `w_cm = [φ(x_1) … φ(x_N)] ψ_cm`.
    pub fn to_original(&self) -> Result<SdgmModel> {
        match &self.form {
            ModelForm::Original { .. } => Ok(self.clone()),
            ModelForm::Dual { reference, kernel } => {
                if *kernel != Kernel::Phi {
                    return Err(SdgmError::UnsupportedConversion(format!(
                        "only phi-kernel dual models have an exact original form (model uses `{kernel}`)"
                    )));
                }
                let components = self
                    .components
                    .iter()
                    .map(|c| {
                        Ok(Component {
                            class: c.class,
                            pi: c.pi,
                            weights: dual_to_original(&c.weights, reference)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                SdgmModel::new(
                    self.num_classes,
                    ModelForm::Original {
                        input_dim: self.input_dim(),
                    },
                    components,
                )
            }
        }
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `[φ(x_1) … φ(x_N)] ψ`.
pub fn dual_to_original(psi: &[f64], reference: &[Vec<f64>]) -> Result<Vec<f64>> {
    if psi.len() != reference.len() {
        return Err(SdgmError::Shape(format!(
            "{} dual weights for {} reference samples",
            psi.len(),
            reference.len()
        )));
    }
    let d = reference
        .first()
        .map(Vec::len)
        .ok_or_else(|| SdgmError::Shape("empty reference set".into()))?;
    let mut w = vec![0.0; expanded_dim(d)?];
    for (p, x) in psi.iter().zip(reference) {
        if *p == 0.0 {
            continue;
        }
        for (wi, phi) in w.iter_mut().zip(expand(x)?) {
            *wi += p * phi;
        }
    }
    Ok(w)
}

/// A Gaussian `N(μ, Σ)` with a prior weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub weight: f64,
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>, weight: f64) -> Result<Self> {
        let g = Self {
            mean,
            covariance,
            weight,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        if d == 0 {
            return Err(SdgmError::InvalidDimension("Gaussian mean is empty".into()));
        }
        if self.covariance.shape() != (d, d) {
            return Err(SdgmError::Shape(format!(
                "covariance is {:?}, expected ({d}, {d})",
                self.covariance.shape()
            )));
        }
        let asym = (&self.covariance - self.covariance.transpose()).abs().max();
        if asym > 1e-12 * self.covariance.abs().max().max(1.0) {
            return Err(SdgmError::Precondition(format!(
                "covariance is not symmetric (max asymmetry {asym})"
            )));
        }
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(SdgmError::Precondition(format!(
                "prior weight {} outside (0, 1]",
                self.weight
            )));
        }
        Ok(())
    }

    pub(crate) fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.covariance.clone())
            .ok_or_else(|| SdgmError::Factorization("covariance is not positive definite".into()))
    }

    /// Log-density at `x`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let chol = self.cholesky()?;
        let d = self.dim();
        let diff = DVector::from_iterator(d, x.iter().zip(&self.mean).map(|(a, b)| a - b));
        let z = chol
            .l()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is invertible");
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Ok(-0.5 * (d as f64) * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * log_det
            - 0.5 * z.norm_squared())
    }
}

/// Collapses a Gaussian into a weight vector over `φ(x)` so that
/// `exp(wᵀφ(x))` is its density.
pub fn collapse_gaussian(g: &GaussianComponent) -> Result<Vec<f64>> {
    let chol = g.cholesky()?;
    let d = g.dim();
    let precision = chol.inverse();
    let mu = DVector::from_column_slice(&g.mean);
    let s_mu = &precision * &mu;
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let mut w = Vec::with_capacity(expanded_dim(d)?);
    w.push(
        -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * mu.dot(&s_mu),
    );
    w.extend(s_mu.iter());
    for i in 0..d {
        w.push(-0.5 * precision[(i, i)]);
        for j in (i + 1)..d {
            w.push(-0.5 * (precision[(i, j)] + precision[(j, i)]));
        }
    }
    Ok(w)
}

/// Linear weights over `[1, xᵀ]` (one row per class) for a single-Gaussian
/// per class model with a shared covariance; the Gaussian weights act as
/// class priors.
pub fn reduce_to_logistic(classes: &[GaussianComponent]) -> Result<Vec<Vec<f64>>> {
    let first = classes
        .first()
        .ok_or_else(|| SdgmError::Precondition("need at least one class".into()))?;
    let d = first.dim();
    for (c, g) in classes.iter().enumerate() {
        if g.dim() != d {
            return Err(SdgmError::Precondition(format!(
                "class {c} has dimension {}",
                g.dim()
            )));
        }
        let diff = (&g.covariance - &first.covariance).abs().max();
        if diff > 1e-12 * first.covariance.abs().max().max(1.0) {
            return Err(SdgmError::Precondition(format!(
                "class {c} covariance differs from class 0 (max diff {diff})"
            )));
        }
    }
    let chol = first.cholesky()?;
    let precision = chol.inverse();
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let shared = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
    Ok(classes
        .iter()
        .map(|g| {
            let mu = DVector::from_column_slice(&g.mean);
            let s_mu = &precision * &mu;
            let mut w = Vec::with_capacity(d + 1);
            w.push(g.weight.ln() - 0.5 * mu.dot(&s_mu) + shared);
            w.extend(s_mu.iter());
            w
        })
        .collect())
}

/// Softmax over `w_cᵀ [1, xᵀ]`.
pub fn logistic_posterior(weights: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    let logits = weights
        .iter()
        .map(|w| {
            if w.len() != x.len() + 1 {
                return Err(SdgmError::Shape(format!(
                    "weights of length {} for input of dimension {}",
                    w.len(),
                    x.len()
                )));
            }
            Ok(w[0] + dot(&w[1..], x))
        })
        .collect::<Result<Vec<_>>>()?;
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}
