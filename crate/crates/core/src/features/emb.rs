//! `EMB1` container: little-endian header (magic, u32 version, u32 dim, u32 frames,
//! f64 frame hop) followed by frames x dim f32 values, row-major.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureSequence;

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

pub fn encode_embedding(seq: &FeatureSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + seq.values().len() * 4);
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&EMB_VERSION.to_le_bytes());
    out.extend_from_slice(&(seq.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.frames() as u32).to_le_bytes());
    out.extend_from_slice(&seq.frame_hop_seconds.to_le_bytes());
    for v in seq.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn u32_at(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(bytes.len(), "truncated header"))
}

pub fn decode_embedding(bytes: &[u8]) -> Result<FeatureSequence> {
    match bytes.get(..4) {
        Some(m) if m == EMB_MAGIC => {}
        Some(m) => return Err(format_err(0, format!("bad magic {:?}", String::from_utf8_lossy(m)))),
        None => return Err(format_err(bytes.len(), "truncated header")),
    }
    let version = u32_at(bytes, 4)?;
    if version != EMB_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let dim = u32_at(bytes, 8)? as usize;
    let frames = u32_at(bytes, 12)? as usize;
    if dim == 0 || frames == 0 {
        return Err(format_err(8, format!("empty shape {frames}x{dim}")));
    }
    let hop = bytes
        .get(16..24)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(bytes.len(), "truncated header"))?;
    if !(hop.is_finite() && hop >= 0.0) {
        return Err(format_err(16, format!("invalid frame hop {hop}")));
    }

    let expected = HEADER_LEN + frames * dim * 4;
    if bytes.len() < expected {
        return Err(format_err(
            bytes.len(),
            format!(
                "truncated payload: header declares {frames}x{dim} ({expected} bytes), file has {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(expected, "trailing bytes after payload"));
    }
    let mut values = Vec::with_capacity(frames * dim);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(HEADER_LEN + 4 * i, format!("non-finite value {v}")));
        }
        values.push(v);
    }
    FeatureSequence::new(String::new(), dim, values, hop)
}

pub fn read_embedding_file(path: &Path) -> Result<FeatureSequence> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embedding(&bytes)
}

pub fn write_embedding_file(seq: &FeatureSequence, path: &Path) -> Result<()> {
    std::fs::write(path, encode_embedding(seq)).map_err(|e| Error::io(path, e))
}
