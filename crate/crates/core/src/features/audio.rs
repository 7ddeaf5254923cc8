use std::path::Path;

use crate::error::{Error, Result};

pub const EXPECTED_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

/// Loads 16 kHz mono 16-bit PCM WAV, scaling samples by 1/32768 into [-1, 1).
pub fn load_audio(path: &Path) -> Result<Audio> {
    let unsupported = |property: String| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        property,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader =
        hound::WavReader::new(std::io::BufReader::new(file)).map_err(|e| unsupported(format!("header: {e}")))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(unsupported(format!("channels = {} (expected 1)", spec.channels)));
    }
    if spec.sample_rate != EXPECTED_SAMPLE_RATE {
        return Err(unsupported(format!(
            "sample rate = {} Hz (expected {EXPECTED_SAMPLE_RATE})",
            spec.sample_rate
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(unsupported(format!(
            "encoding = {:?} {}-bit (expected 16-bit integer PCM)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| unsupported(format!("corrupt sample data: {e}")))?;
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
    })
}
