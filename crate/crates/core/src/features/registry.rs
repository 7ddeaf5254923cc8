//! Backbone registry shared with external embedding extractors: which pretrained
//! checkpoint produces each named stream, and the dim its files must have.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{read_embedding_file, FeatureSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    RawWaveform,
    Spectrogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub checkpoint: String,
    pub dim: usize,
    pub input: InputKind,
    /// Encoder layer exported; the final layer when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<i32>,
}

/// `[stream.<name>]` tables keyed by stream name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Registry {
    #[serde(default)]
    pub stream: BTreeMap<String, BackboneSpec>,
}

impl Registry {
    pub fn parse(text: &str) -> Result<Registry> {
        let reg: Registry = toml::from_str(text).map_err(|e| Error::Config(format!("registry: {e}")))?;
        if let Some((name, _)) = reg.stream.iter().find(|(_, b)| b.dim == 0) {
            return Err(Error::Config(format!("registry stream `{name}` has zero dim")));
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Registry> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn get(&self, stream: &str) -> Option<&BackboneSpec> {
        self.stream.get(stream)
    }
}

/// Reads an EMB1 file and checks it is non-empty and, if given, has the expected dim.
pub fn validate_embedding_file(path: &Path, expected_dim: Option<usize>) -> Result<FeatureSequence> {
    let seq = read_embedding_file(path)?;
    if seq.frames() == 0 {
        return Err(Error::Format {
            offset: 0,
            message: format!("{}: no frames", path.display()),
        });
    }
    if let Some(d) = expected_dim.filter(|d| *d != seq.dim()) {
        return Err(Error::shape(format!(
            "{}: dim {} but {d} expected",
            path.display(),
            seq.dim()
        )));
    }
    Ok(seq)
}
