//! Frame-level feature sequences: audio loading, log-mel spectrograms, fixed-length
//! segmentation, and the on-disk embedding and table formats.

mod audio;
mod emb;
mod mel;
mod registry;
mod segment;
mod table;

pub use audio::{load_audio, Audio, EXPECTED_SAMPLE_RATE};
pub use emb::{decode_embedding, encode_embedding, read_embedding_file, write_embedding_file, EMB_MAGIC, EMB_VERSION};
pub use mel::{mel_spectrogram, MelFilterbank, FLOOR, HOP_LENGTH, N_FFT, N_MELS, WIN_LENGTH};
pub use registry::{validate_embedding_file, BackboneSpec, InputKind, Registry};
pub use segment::{segment_features, SegmentSet, SEGMENT_SECONDS};
pub use table::{parse_feature_table, read_feature_table};

use crate::error::{Error, Result};

/// A frames x dim matrix of features for one stream, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub stream_name: String,
    dim: usize,
    frames: usize,
    values: Vec<f32>,
    /// Seconds between frame starts; 0 marks pre-pooled vectors.
    pub frame_hop_seconds: f64,
}

impl FeatureSequence {
    pub fn new(
        stream_name: impl Into<String>,
        dim: usize,
        values: Vec<f32>,
        frame_hop_seconds: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dim must be positive"));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::shape(format!(
                "{} values do not form whole frames of dim {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at frame {} dim {}",
                pos / dim,
                pos % dim
            )));
        }
        if !(frame_hop_seconds >= 0.0 && frame_hop_seconds.is_finite()) {
            return Err(Error::invalid(format!("bad frame hop {frame_hop_seconds}")));
        }
        Ok(FeatureSequence {
            stream_name: stream_name.into(),
            dim,
            frames: values.len() / dim,
            values,
            frame_hop_seconds,
        })
    }

    pub fn with_stream_name(mut self, name: impl Into<String>) -> Self {
        self.stream_name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames as f64 * self.frame_hop_seconds
    }
}
