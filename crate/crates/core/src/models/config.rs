use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{ModelSpec, TrainConfig};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_model_spec(path: &Path) -> Result<ModelSpec> {
    let spec: ModelSpec = toml::from_str(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_train_config(path: &Path) -> Result<TrainConfig> {
    let cfg: TrainConfig = toml::from_str(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn model_spec_to_string(spec: &ModelSpec) -> Result<String> {
    toml::to_string(spec).map_err(|e| Error::Config(e.to_string()))
}

pub fn train_config_to_string(cfg: &TrainConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}
