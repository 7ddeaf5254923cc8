use std::collections::HashMap;
use std::path::Path;

use crate::dataset::{BinaryLabels, Recording};
use crate::error::{Error, Result};
use crate::features::{read_embedding_file, read_feature_table, segment_features, FeatureSequence, SEGMENT_SECONDS};
use crate::models::{ModelKind, ModelSpec, StreamSpec};
use crate::nn::Matrix;

/// Per-dimension mean over frames.
pub fn average_pool_time(seq: &FeatureSequence) -> Result<Vec<f64>> {
    if seq.frames() == 0 {
        return Err(Error::invalid("cannot pool a sequence with no frames"));
    }
    let mut sums = vec![0.0f64; seq.dim()];
    for t in 0..seq.frames() {
        for (s, &v) in sums.iter_mut().zip(seq.frame(t)) {
            *s += f64::from(v);
        }
    }
    let n = seq.frames() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Model input for one segment.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentInput {
    /// One time-pooled vector per stream, in model stream order.
    Pooled(Vec<Vec<f64>>),
    /// channels (feature dim) x time, for the CNN baseline.
    Sequence(Matrix),
}

/// Labels a segment inherits from its recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentTarget {
    pub labels: BinaryLabels,
    /// MADRS total divided by the severity scale.
    pub severity: Option<f64>,
}

/// Recordings with their model-ready segments.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub recordings: Vec<Recording>,
    pub segments: Vec<Vec<SegmentInput>>,
    index: HashMap<String, usize>,
}

fn stream_segments(seq: &FeatureSequence, recording_id: &str) -> Result<Vec<FeatureSequence>> {
    if seq.frame_hop_seconds > 0.0 {
        let set = segment_features(recording_id, seq, SEGMENT_SECONDS)?;
        if !set.is_empty() {
            return Ok(set.segments);
        }
    }
    Ok(vec![seq.clone()])
}

fn transpose_sequence(seq: &FeatureSequence) -> Matrix {
    let mut m = Matrix::zeros(seq.dim(), seq.frames());
    for t in 0..seq.frames() {
        for (c, &v) in seq.frame(t).iter().enumerate() {
            m.set(c, t, f64::from(v));
        }
    }
    m
}

impl Corpus {
    /// Builds segments from per-stream sequences supplied by `fetch`.
    pub fn build(
        recordings: Vec<Recording>,
        spec: &ModelSpec,
        mut fetch: impl FnMut(&Recording, &StreamSpec) -> Result<FeatureSequence>,
    ) -> Result<Corpus> {
        spec.validate()?;
        let mut segments = Vec::with_capacity(recordings.len());
        for rec in &recordings {
            let mut per_stream = Vec::with_capacity(spec.streams.len());
            for stream in &spec.streams {
                let wrap = |e: Error| Error::StreamLoad {
                    recording: rec.recording_id.clone(),
                    stream: stream.name.clone(),
                    source: Box::new(e),
                };
                let mut seq = fetch(rec, stream)?;
                if seq.dim() != stream.dim {
                    return Err(wrap(Error::shape(format!(
                        "dim {} but the model declares {}",
                        seq.dim(),
                        stream.dim
                    ))));
                }
                if let (Some(hop), true) = (stream.frame_hop_seconds, seq.frame_hop_seconds == 0.0) {
                    seq.frame_hop_seconds = hop;
                }
                per_stream.push(stream_segments(&seq, &rec.recording_id).map_err(wrap)?);
            }
            let n = per_stream.iter().map(Vec::len).min().unwrap_or(0);
            let inputs = (0..n)
                .map(|i| match spec.kind {
                    ModelKind::CnnBaseline => Ok(SegmentInput::Sequence(transpose_sequence(&per_stream[0][i]))),
                    _ => per_stream
                        .iter()
                        .map(|segs| average_pool_time(&segs[i]))
                        .collect::<Result<Vec<_>>>()
                        .map(SegmentInput::Pooled),
                })
                .collect::<Result<Vec<_>>>()?;
            segments.push(inputs);
        }
        let index = recordings
            .iter()
            .enumerate()
            .map(|(i, r)| (r.recording_id.clone(), i))
            .collect();
        Ok(Corpus {
            recordings,
            segments,
            index,
        })
    }

    /// Loads every stream named by `spec` from the manifest's feature references.
    /// Relative paths resolve against `base_dir`; `.emb` files are EMB1, anything
    /// else is read as a numeric feature table.
    pub fn load(recordings: Vec<Recording>, spec: &ModelSpec, base_dir: &Path) -> Result<Corpus> {
        Self::build(recordings, spec, |rec, stream| {
            let missing = || Error::MissingStream {
                recording: rec.recording_id.clone(),
                stream: stream.name.clone(),
            };
            let rel = rec.feature_refs.get(&stream.name).ok_or_else(missing)?;
            let path = base_dir.join(rel);
            if !path.exists() {
                return Err(missing());
            }
            let seq = if path.extension().is_some_and(|e| e == "emb") {
                read_embedding_file(&path)
            } else {
                read_feature_table(&path, stream.dim)
            };
            seq.map(|s| s.with_stream_name(stream.name.clone()))
                .map_err(|e| Error::StreamLoad {
                    recording: rec.recording_id.clone(),
                    stream: stream.name.clone(),
                    source: Box::new(e),
                })
        })
    }

    pub fn position(&self, recording_id: &str) -> Option<usize> {
        self.index.get(recording_id).copied()
    }

    pub fn total_segments(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    /// Segments of the given recordings, labelled with their recording's ratings.
    pub fn training_set(&self, ids: &[String], severity_scale: f64) -> Result<super::TrainingSet<'_>> {
        let mut set = super::TrainingSet::default();
        for id in ids {
            let pos = self
                .position(id)
                .ok_or_else(|| Error::invalid(format!("unknown recording `{id}`")))?;
            let rec = &self.recordings[pos];
            let target = SegmentTarget {
                labels: rec.labels(),
                severity: Some(f64::from(rec.madrs_total) / severity_scale),
            };
            let slot = set.recordings.len();
            set.recordings.push(rec);
            for input in &self.segments[pos] {
                set.inputs.push(input);
                set.targets.push(target);
                set.recording_of.push(slot);
            }
        }
        Ok(set)
    }
}
