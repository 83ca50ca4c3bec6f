use nalgebra::{Cholesky, DMatrix, DVector};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Result, SdgmError};

/// Default two-class, eight-components-per-class mixture.
pub const DEFAULT_GMM_SPEC_JSON: &str = include_str!("../../../../data/gmm/two_rings_8x2.v1.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponentSpec {
    pub class: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub components: Vec<GmmComponentSpec>,
}

pub fn default_gmm_spec() -> GmmSpec {
    serde_json::from_str(DEFAULT_GMM_SPEC_JSON).expect("bundled mixture spec parses")
}

struct Prepared {
    num_classes: usize,
    dim: usize,
    per_class: Vec<Vec<usize>>,
    mixing: Vec<WeightedIndex<f64>>,
    factors: Vec<DMatrix<f64>>,
}

impl GmmSpec {
    pub fn num_classes(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.class + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    fn prepare(&self) -> Result<Prepared> {
        let dim = self.dim();
        if dim == 0 {
            return Err(SdgmError::Spec("spec has no components".into()));
        }
        let num_classes = self.num_classes();
        let mut per_class = vec![Vec::new(); num_classes];
        let mut factors = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            if c.mean.len() != dim || c.cov.len() != dim || c.cov.iter().any(|r| r.len() != dim) {
                return Err(SdgmError::Spec(format!(
                    "component {i} does not have dimension {dim}"
                )));
            }
            if c.weight.is_nan() || c.weight <= 0.0 {
                return Err(SdgmError::Spec(format!(
                    "component {i} has non-positive weight"
                )));
            }
            let cov = DMatrix::from_fn(dim, dim, |r, s| c.cov[r][s]);
            if (&cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
                return Err(SdgmError::Spec(format!(
                    "component {i} covariance is not symmetric"
                )));
            }
            let chol = Cholesky::new(cov).ok_or_else(|| {
                SdgmError::Spec(format!("component {i} covariance is not positive definite"))
            })?;
            factors.push(chol.l());
            per_class[c.class].push(i);
        }
        let mut mixing = Vec::with_capacity(num_classes);
        for (class, members) in per_class.iter().enumerate() {
            if members.is_empty() {
                return Err(SdgmError::Spec(format!("class {class} has no components")));
            }
            let weights: Vec<f64> = members.iter().map(|&i| self.components[i].weight).collect();
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(SdgmError::Spec(format!(
                    "class {class} mixing weights sum to {total}"
                )));
            }
            mixing.push(WeightedIndex::new(&weights).map_err(|e| SdgmError::Spec(e.to_string()))?);
        }
        Ok(Prepared {
            num_classes,
            dim,
            per_class,
            mixing,
            factors,
        })
    }
}

fn draw(spec: &GmmSpec, prep: &Prepared, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = rng.random_range(0..prep.num_classes);
        let comp = prep.per_class[class][prep.mixing[class].sample(rng)];
        let z = DVector::from_fn(prep.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &prep.factors[comp] * z + DVector::from_column_slice(&spec.components[comp].mean);
        rows.push(x.iter().copied().collect());
        labels.push(class);
    }
    Dataset::new(rows, labels, prep.num_classes)
}

/// Draws a train and a test set: class uniformly, then component by its
/// mixing weight, then the point from that component's Gaussian.
pub fn synth_gmm(
    spec: &GmmSpec,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let prep = spec.prepare()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = draw(spec, &prep, n_train, &mut rng)?;
    let mut test = draw(spec, &prep, n_test, &mut rng)?;
    train.name = Some(format!("synth_train_seed{seed}"));
    test.name = Some(format!("synth_test_seed{seed}"));
    Ok((train, test))
}
