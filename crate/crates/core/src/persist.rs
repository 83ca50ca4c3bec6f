//! JSON model files.
//!
//! ```json
//! { "format": "sdgm-model", "version": 1,
//!   "feature_ordering": "bias,linear,upper-quadratic-row-major/v1",
//!   "form": "dual", "reference": [[..], ..], "kernel": "phi",
//!   "num_classes": 2,
//!   "components": [{ "class": 0, "pi": 0.5, "weights": [..] }, ..],
//!   "label_names": ["0", "1"],
//!   "standardizer": { "mean": [..], "std": [..] } }
//! ```
//!
//! An original-form file carries `"form": "original", "input_dim": D`
//! instead of `reference`/`kernel`. Floats are written in shortest
//! round-trip form, so reading a file back reproduces every value exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Standardizer;
use crate::error::{Result, SdgmError};
use crate::feature_map::FEATURE_ORDERING;
use crate::model::{Component, ModelForm, PosteriorResult, SdgmModel};

pub const MODEL_FORMAT: &str = "sdgm-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    feature_ordering: String,
    #[serde(flatten)]
    form: ModelForm,
    num_classes: usize,
    components: Vec<Component>,
    #[serde(default)]
    label_names: Vec<String>,
    #[serde(default)]
    standardizer: Option<Standardizer>,
}

/// A model together with the input transform and label vocabulary it was
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: SdgmModel,
    pub label_names: Vec<String>,
    pub standardizer: Option<Standardizer>,
}

impl ModelFile {
    pub fn new(model: SdgmModel) -> Self {
        let label_names = (0..model.num_classes()).map(|c| c.to_string()).collect();
        Self {
            model,
            label_names,
            standardizer: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_ordering: FEATURE_ORDERING.into(),
            form: self.model.form().clone(),
            num_classes: self.model.num_classes(),
            components: self.model.components().to_vec(),
            label_names: self.label_names.clone(),
            standardizer: self.standardizer.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(SdgmError::Schema(format!(
                "not a model file (format `{}`)",
                doc.format
            )));
        }
        if doc.version != MODEL_VERSION {
            return Err(SdgmError::Schema(format!(
                "unsupported model file version {}",
                doc.version
            )));
        }
        if doc.feature_ordering != FEATURE_ORDERING {
            return Err(SdgmError::Schema(format!(
                "unsupported feature ordering `{}`",
                doc.feature_ordering
            )));
        }
        let model = SdgmModel::new(doc.num_classes, doc.form, doc.components)?;
        let label_names = if doc.label_names.is_empty() {
            (0..model.num_classes()).map(|c| c.to_string()).collect()
        } else {
            doc.label_names
        };
        if label_names.len() != model.num_classes() {
            return Err(SdgmError::Schema(format!(
                "{} label names for {} classes",
                label_names.len(),
                model.num_classes()
            )));
        }
        if let Some(s) = &doc.standardizer {
            if s.mean.len() != model.input_dim() || s.std.len() != model.input_dim() {
                return Err(SdgmError::Schema(
                    "standardizer dimension does not match the model".into(),
                ));
            }
        }
        Ok(Self {
            model,
            label_names,
            standardizer: doc.standardizer,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Maps a raw input into the space the model was trained in.
    pub fn prepare(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.standardizer {
            Some(s) => s.transform(x),
            None => Ok(x.to_vec()),
        }
    }

    pub fn posterior(&self, x: &[f64]) -> Result<PosteriorResult> {
        self.model.posterior(&self.prepare(x)?)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.model.predict(&self.prepare(x)?)
    }
}
