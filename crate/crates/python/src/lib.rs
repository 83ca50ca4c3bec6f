use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sdgm_core::data::{default_gmm_spec, Standardizer};
use sdgm_core::{
    feature_map, model, Dataset, GaussianComponent, GmmSpec, LabelColumn, ModelFile, SdgmError,
    TrainConfig,
};

fn err(e: SdgmError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Quadratic feature expansion `[1, x, upper-triangular x_i x_j]`.
#[pyfunction]
fn expand(x: Vec<f64>) -> PyResult<Vec<f64>> {
    feature_map::expand(&x).map_err(err)
}

#[pyfunction]
fn expanded_dim(dim: usize) -> PyResult<usize> {
    feature_map::expanded_dim(dim).map_err(err)
}

#[pyfunction]
fn phi_kernel(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    feature_map::phi_kernel(&x, &y).map_err(err)
}

#[pyfunction]
fn poly_kernel(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    feature_map::poly_kernel(&x, &y).map_err(err)
}

/// Weights `w` with `exp(w · expand(x))` equal to the density `N(x; mean, cov)`.
#[pyfunction]
fn collapse_gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let d = mean.len();
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err(format!("covariance must be {d}x{d}")));
    }
    let cov = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let g = GaussianComponent::new(mean, cov, 1.0).map_err(err)?;
    model::collapse_gaussian(&g).map_err(err)
}

/// A trained classifier together with its input standardisation.
#[pyclass(name = "Model", module = "sdgm")]
struct PyModel {
    inner: ModelFile,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ModelFile::from_json(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ModelFile::load(path).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    /// Class posteriors for one raw (unstandardised) input.
    fn posterior(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.posterior(&x).map_err(err)?.class_posteriors)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<usize> {
        self.inner.predict(&x).map_err(err)
    }

    fn predict_many(&self, xs: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        xs.iter()
            .map(|x| self.inner.predict(x).map_err(err))
            .collect()
    }

    fn sparsity<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.model.sparsity_metrics();
        let d = PyDict::new(py);
        d.set_item("nonzero_weights", s.nonzero_weights)?;
        d.set_item("components_per_class", s.components_per_class)?;
        Ok(d)
    }

    /// Same classifier expressed over the explicit quadratic features.
    fn to_original(&self) -> PyResult<Self> {
        let model = self.inner.model.to_original().map_err(err)?;
        Ok(Self {
            inner: ModelFile {
                model,
                ..self.inner.clone()
            },
        })
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.model.num_classes()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.model.input_dim()
    }

    #[getter]
    fn form(&self) -> &'static str {
        match self.inner.model.form() {
            sdgm_core::ModelForm::Original { .. } => "original",
            sdgm_core::ModelForm::Dual { .. } => "dual",
        }
    }

    #[getter]
    fn label_names(&self) -> Vec<String> {
        self.inner.label_names.clone()
    }

    fn __repr__(&self) -> String {
        let s = self.inner.model.sparsity_metrics();
        format!(
            "Model(form={}, classes={}, components={:?}, nonzero_weights={})",
            self.form(),
            self.num_classes(),
            s.components_per_class,
            s.nonzero_weights
        )
    }
}

/// Trains on rows `x` with integer labels `y`. `config` is a JSON object of
/// training options; returns the model and the training report as a dict.
#[pyfunction]
#[pyo3(signature = (x, y, config = None, standardize = true))]
fn fit<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    config: Option<&str>,
    standardize: bool,
) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let cfg: TrainConfig = match config {
        Some(text) => serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("invalid config: {e}")))?,
        None => TrainConfig::default(),
    };
    let classes = y.iter().max().map_or(0, |m| m + 1);
    let ds = Dataset::new(x, y, classes).map_err(err)?;
    let standardizer = standardize.then(|| Standardizer::fit(&ds));
    let prepared = match &standardizer {
        Some(s) => s.apply(&ds).map_err(err)?,
        None => ds.clone(),
    };
    let (model, mut report) = py.detach(|| sdgm_core::fit(&prepared, &cfg)).map_err(err)?;
    report.standardized = standardize;
    let inner = ModelFile {
        model,
        label_names: ds.label_names().to_vec(),
        standardizer,
    };
    let report =
        serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((PyModel { inner }, json_loads(py, &report)?))
}

type Arrays = (Vec<Vec<f64>>, Vec<usize>);
type LabelNames = Vec<String>;

fn arrays(ds: &Dataset) -> Arrays {
    (
        ds.rows().map(<[f64]>::to_vec).collect(),
        ds.labels().to_vec(),
    )
}

/// Reads a CSV with a header and the label in the last column; returns
/// `(x, y, label_names)`.
#[pyfunction]
fn load_csv(path: &str) -> PyResult<(Vec<Vec<f64>>, Vec<usize>, LabelNames)> {
    let ds = sdgm_core::data::load_csv(path, LabelColumn::Last).map_err(err)?;
    let (x, y) = arrays(&ds);
    Ok((x, y, ds.label_names().to_vec()))
}

/// Samples `((x_train, y_train), (x_test, y_test))` from a mixture spec
/// (JSON text) or the bundled two-ring spec.
#[pyfunction]
#[pyo3(signature = (n_train, n_test, seed = 0, spec = None))]
fn synth_gmm(
    n_train: usize,
    n_test: usize,
    seed: u64,
    spec: Option<&str>,
) -> PyResult<(Arrays, Arrays)> {
    let spec: GmmSpec = match spec {
        Some(text) => serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("invalid spec: {e}")))?,
        None => default_gmm_spec(),
    };
    let (train, test) = sdgm_core::data::synth_gmm(&spec, n_train, n_test, seed).map_err(err)?;
    Ok((arrays(&train), arrays(&test)))
}

#[pymodule]
fn sdgm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(expand, m)?)?;
    m.add_function(wrap_pyfunction!(expanded_dim, m)?)?;
    m.add_function(wrap_pyfunction!(phi_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(poly_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(collapse_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(load_csv, m)?)?;
    m.add_function(wrap_pyfunction!(synth_gmm, m)?)?;
    m.add_class::<PyModel>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
