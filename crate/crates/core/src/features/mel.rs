use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::features::audio::EXPECTED_SAMPLE_RATE;
use crate::features::FeatureSequence;

pub const N_MELS: usize = 80;
/// 25 ms at 16 kHz.
pub const WIN_LENGTH: usize = 400;
/// 10 ms at 16 kHz.
pub const HOP_LENGTH: usize = 160;
pub const N_FFT: usize = 512;
pub const FLOOR: f64 = 1e-10;
const F_MAX: f64 = 8000.0;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the HTK mel scale over 0-8000 Hz.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// n_mels rows of (n_fft/2 + 1) weights.
    weights: Vec<Vec<f64>>,
    centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, f_max: f64) -> Self {
        let n_bins = n_fft / 2 + 1;
        let mel_max = hz_to_mel(f_max);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = f64::from(sample_rate) / n_fft as f64;
        let weights = (0..n_mels)
            .map(|m| {
                let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        let up = (f - lo) / (c - lo);
                        let down = (hi - f) / (hi - c);
                        up.min(down).max(0.0)
                    })
                    .collect()
            })
            .collect();
        MelFilterbank {
            weights,
            centers: edges[1..=n_mels].to_vec(),
        }
    }

    pub fn standard() -> Self {
        Self::new(N_MELS, N_FFT, EXPECTED_SAMPLE_RATE, F_MAX)
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers
    }

    fn apply(&self, power: &[f64], out: &mut Vec<f32>) {
        for row in &self.weights {
            let e: f64 = row.iter().zip(power).map(|(w, p)| w * p).sum();
            out.push(e.max(FLOOR).ln() as f32);
        }
    }
}

struct Stft {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl Stft {
    fn new() -> Self {
        let window = (0..WIN_LENGTH)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / WIN_LENGTH as f64).cos())
            .collect();
        Stft {
            fft: FftPlanner::new().plan_fft_forward(N_FFT),
            window,
        }
    }

    fn power(&self, frame: &[f32], buf: &mut [Complex<f64>], power: &mut [f64]) {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < WIN_LENGTH {
                Complex::new(f64::from(frame[i]) * self.window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        self.fft.process(buf);
        for (p, x) in power.iter_mut().zip(buf.iter()) {
            *p = x.norm_sqr();
        }
    }
}

/// 80-band log-mel spectrogram: 25 ms periodic-Hann frames every 10 ms, 512-point FFT,
/// power spectrum, natural log with floor 1e-10. No centre padding, so a signal of
/// n samples yields floor((n - 400) / 160) + 1 frames.
pub fn mel_spectrogram(samples: &[f32], sample_rate: u32) -> Result<FeatureSequence> {
    if sample_rate != EXPECTED_SAMPLE_RATE {
        return Err(Error::invalid(format!(
            "mel spectrogram expects {EXPECTED_SAMPLE_RATE} Hz, got {sample_rate}"
        )));
    }
    if samples.len() < WIN_LENGTH {
        return Err(Error::invalid(format!(
            "{} samples is shorter than one {WIN_LENGTH}-sample window",
            samples.len()
        )));
    }
    let n_frames = (samples.len() - WIN_LENGTH) / HOP_LENGTH + 1;
    let bank = MelFilterbank::standard();
    let stft = Stft::new();
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    let mut power = vec![0.0; N_FFT / 2 + 1];
    let mut values = Vec::with_capacity(n_frames * N_MELS);
    for t in 0..n_frames {
        let start = t * HOP_LENGTH;
        stft.power(&samples[start..start + WIN_LENGTH], &mut buf, &mut power);
        bank.apply(&power, &mut values);
    }
    FeatureSequence::new(
        "spectro",
        N_MELS,
        values,
        HOP_LENGTH as f64 / f64::from(sample_rate),
    )
}
