//! Symptom detection models: single-stream heads over pooled embeddings, multi-stream
//! fusion, and the CNN baseline over conventional features, each trainable with one
//! output head (single-task) or ten symptom heads plus a severity regressor (multi-task).

mod config;
mod data;
mod loss;
mod network;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Symptom;
use crate::error::{Error, Result};

pub use config::{load_model_spec, load_train_config, model_spec_to_string, train_config_to_string};
pub use data::{average_pool_time, Corpus, SegmentInput, SegmentTarget};
pub use loss::{multitask_loss, LossBreakdown, OutputGrads};
pub use network::{build_model, ForwardOutput, Model, SegmentOutput};
pub use train::{predict_segments, train, EpochLog, TrainConfig, TrainLog, TrainingSet};

pub const HIDDEN_WIDTH: usize = 100;
pub const CONV_CHANNELS: usize = 100;
pub const CONV1_KERNEL: usize = 3;
pub const CONV2_KERNEL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SingleStream,
    Fusion,
    CnnBaseline,
}

/// What a single-task model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Symptom(Symptom),
    Severity,
}

impl Task {
    pub fn all() -> Vec<Task> {
        Symptom::ALL
            .into_iter()
            .map(Task::Symptom)
            .chain(std::iter::once(Task::Severity))
            .collect()
    }

    pub fn label(&self) -> String {
        match self {
            Task::Symptom(s) => s.abbr().to_string(),
            Task::Severity => "severity".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HeadMode {
    SingleTask(Task),
    MultiTask,
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadMode::MultiTask => f.write_str("multi_task"),
            HeadMode::SingleTask(Task::Severity) => f.write_str("severity"),
            HeadMode::SingleTask(Task::Symptom(s)) => write!(f, "symptom:{}", s.abbr()),
        }
    }
}

impl FromStr for HeadMode {
    type Err = Error;

    /// `multi_task`, `severity`, or `symptom:<abbr>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "multi_task" => Ok(HeadMode::MultiTask),
            "severity" => Ok(HeadMode::SingleTask(Task::Severity)),
            other => other
                .strip_prefix("symptom:")
                .ok_or_else(|| Error::Config(format!("unknown head mode `{other}`")))
                .and_then(|abbr| abbr.parse().map(|s| HeadMode::SingleTask(Task::Symptom(s)))),
        }
    }
}

impl TryFrom<String> for HeadMode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<HeadMode> for String {
    fn from(m: HeadMode) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadInit {
    #[default]
    Glorot,
    /// All output-head weights and biases start at zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub name: String,
    pub dim: usize,
    /// Frame hop for feature tables, which carry none of their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_hop_seconds: Option<f64>,
}

impl StreamSpec {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        StreamSpec {
            name: name.into(),
            dim,
            frame_hop_seconds: None,
        }
    }
}

fn default_hidden() -> usize {
    HIDDEN_WIDTH
}
fn default_conv_dropout() -> f64 {
    0.3
}
fn default_dense_dropout() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub head_mode: HeadMode,
    #[serde(default = "default_hidden")]
    pub hidden_width: usize,
    /// Used by the CNN baseline only.
    #[serde(default = "default_conv_dropout")]
    pub conv_dropout: f64,
    #[serde(default = "default_dense_dropout")]
    pub dense_dropout: f64,
    #[serde(default)]
    pub head_init: HeadInit,
    #[serde(rename = "stream")]
    pub streams: Vec<StreamSpec>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, streams: Vec<StreamSpec>, head_mode: HeadMode) -> Self {
        ModelSpec {
            kind,
            head_mode,
            hidden_width: HIDDEN_WIDTH,
            conv_dropout: default_conv_dropout(),
            dense_dropout: default_dense_dropout(),
            head_init: HeadInit::Glorot,
            streams,
        }
    }

    pub fn single_stream(name: &str, dim: usize, head_mode: HeadMode) -> Self {
        Self::new(ModelKind::SingleStream, vec![StreamSpec::new(name, dim)], head_mode)
    }

    pub fn fusion(streams: &[(&str, usize)], head_mode: HeadMode) -> Self {
        Self::new(
            ModelKind::Fusion,
            streams.iter().map(|(n, d)| StreamSpec::new(*n, *d)).collect(),
            head_mode,
        )
    }

    pub fn cnn(name: &str, dim: usize, head_mode: HeadMode) -> Self {
        Self::new(ModelKind::CnnBaseline, vec![StreamSpec::new(name, dim)], head_mode)
    }

    pub fn with_head_mode(&self, head_mode: HeadMode) -> Self {
        ModelSpec {
            head_mode,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_width != HIDDEN_WIDTH {
            return Err(Error::Config(format!(
                "hidden width is fixed at {HIDDEN_WIDTH}, got {}",
                self.hidden_width
            )));
        }
        match (self.kind, self.streams.len()) {
            (ModelKind::Fusion, n) if n < 2 => {
                return Err(Error::Config(format!("fusion needs at least 2 streams, got {n}")))
            }
            (ModelKind::SingleStream | ModelKind::CnnBaseline, n) if n != 1 => {
                return Err(Error::Config(format!("{:?} takes exactly one stream, got {n}", self.kind)))
            }
            _ => {}
        }
        if let Some(s) = self.streams.iter().find(|s| s.dim == 0) {
            return Err(Error::Config(format!("stream `{}` has zero dim", s.name)));
        }
        let mut names: Vec<&str> = self.streams.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.streams.len() {
            return Err(Error::Config("duplicate stream names".into()));
        }
        for rate in [self.conv_dropout, self.dense_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn classification_heads(&self) -> Vec<Symptom> {
        match self.head_mode {
            HeadMode::MultiTask => Symptom::ALL.to_vec(),
            HeadMode::SingleTask(Task::Symptom(s)) => vec![s],
            HeadMode::SingleTask(Task::Severity) => Vec::new(),
        }
    }

    pub fn has_severity_head(&self) -> bool {
        matches!(
            self.head_mode,
            HeadMode::MultiTask | HeadMode::SingleTask(Task::Severity)
        )
    }

    /// Closed-form trainable parameter count.
    pub fn expected_param_count(&self) -> usize {
        let h = self.hidden_width;
        let trunk = match self.kind {
            ModelKind::SingleStream => self.streams[0].dim * h + h,
            ModelKind::Fusion => {
                let branches: usize = self.streams.iter().map(|s| s.dim * h + h).sum();
                branches + self.streams.len() * h * h + h
            }
            ModelKind::CnnBaseline => {
                let c = CONV_CHANNELS;
                (self.streams[0].dim * CONV1_KERNEL * c + c) + (c * CONV2_KERNEL * c + c) + (c * h + h)
            }
        };
        let heads = self.classification_heads().len() * (2 * h + 2);
        let severity = if self.has_severity_head() { h + 1 } else { 0 };
        trunk + heads + severity
    }
}
