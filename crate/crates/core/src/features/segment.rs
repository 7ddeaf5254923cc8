use crate::error::{Error, Result};
use crate::features::FeatureSequence;

pub const SEGMENT_SECONDS: f64 = 10.0;

/// Time-ordered, equal-length segments cut from one recording's features.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    pub recording_id: String,
    pub segments: Vec<FeatureSequence>,
    /// Frames of real data in each segment; the rest is padding.
    pub unpadded_frames: Vec<usize>,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Cuts consecutive non-overlapping windows of `segment_seconds`. A trailing remainder of
/// at least half a window is kept and padded by repeating its final frame; a shorter
/// remainder is dropped.
pub fn segment_features(
    recording_id: &str,
    seq: &FeatureSequence,
    segment_seconds: f64,
) -> Result<SegmentSet> {
    if !(segment_seconds > 0.0) {
        return Err(Error::invalid(format!(
            "segment length must be positive, got {segment_seconds}"
        )));
    }
    if !(seq.frame_hop_seconds > 0.0) {
        return Err(Error::invalid("cannot segment a sequence without a frame hop"));
    }
    let seg_frames = ((segment_seconds / seq.frame_hop_seconds).round() as usize).max(1);
    let dim = seq.dim();
    let full = seq.frames() / seg_frames;
    let remainder = seq.frames() % seg_frames;

    let mut set = SegmentSet {
        recording_id: recording_id.to_string(),
        segments: Vec::with_capacity(full + 1),
        unpadded_frames: Vec::with_capacity(full + 1),
    };
    let values = seq.values();
    for i in 0..full {
        let chunk = values[i * seg_frames * dim..(i + 1) * seg_frames * dim].to_vec();
        set.segments.push(FeatureSequence::new(
            seq.stream_name.clone(),
            dim,
            chunk,
            seq.frame_hop_seconds,
        )?);
        set.unpadded_frames.push(seg_frames);
    }
    if remainder > 0 && 2 * remainder >= seg_frames {
        let start = full * seg_frames * dim;
        let mut chunk = values[start..].to_vec();
        let last = values[values.len() - dim..].to_vec();
        for _ in remainder..seg_frames {
            chunk.extend_from_slice(&last);
        }
        set.segments.push(FeatureSequence::new(
            seq.stream_name.clone(),
            dim,
            chunk,
            seq.frame_hop_seconds,
        )?);
        set.unpadded_frames.push(remainder);
    }
    Ok(set)
}
