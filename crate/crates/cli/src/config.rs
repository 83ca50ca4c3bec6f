use std::path::Path;

use anyhow::{bail, Context, Result};
use sdgm_core::TrainConfig;
use serde::Serialize;

use crate::TrainFlags;

/// Training configuration plus the preprocessing switch, as written in
/// config files and manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub standardize: bool,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            standardize: true,
        }
    }
}

/// Parses a flat JSON object of config keys. Missing keys keep their defaults.
pub fn parse(text: &str) -> Result<ResolvedConfig> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).context("config is not valid JSON")?;
    let Some(map) = value.as_object_mut() else {
        bail!("config must be a JSON object")
    };
    let standardize = match map.remove("standardize") {
        None => true,
        Some(serde_json::Value::Bool(b)) => b,
        Some(other) => bail!("`standardize` must be true or false, got {other}"),
    };
    let train: TrainConfig = serde_json::from_value(value).context("invalid config")?;
    Ok(ResolvedConfig { train, standardize })
}

pub fn resolve(flags: &TrainFlags) -> Result<ResolvedConfig> {
    let mut cfg = match &flags.config {
        Some(path) => load(path)?,
        None => ResolvedConfig::default(),
    };
    if let Some(seed) = flags.seed {
        cfg.train.seed = seed;
    }
    if let Some(form) = flags.form {
        cfg.train.form = form;
    }
    if let Some(kernel) = flags.kernel {
        cfg.train.kernel = kernel;
    }
    if let Some(components) = &flags.components {
        cfg.train.components = components.clone();
    }
    cfg.train.validate()?;
    Ok(cfg)
}

fn load(path: &Path) -> Result<ResolvedConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}
