//! Synthetic datasets with a planted symptom signal in the embedding streams.
//!
//! For each stream every symptom owns a fixed unit direction. A frame of a recording
//! is its speaker's offset, plus `signal_strength` times the direction of every
//! present symptom, plus white noise. With `signal_strength = 0` labels carry no
//! information about the features.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_manifest, Recording, Symptom, NUM_SYMPTOMS};
use crate::error::{Error, Result};
use crate::features::{write_embedding_file, FeatureSequence};
use crate::models::{Corpus, ModelSpec};
use crate::seed::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStream {
    pub name: String,
    pub dim: usize,
}

/// Present-class priors, graded from 0.55 down to 0.25 with appetite and suicidal
/// thoughts rarest.
pub const DEFAULT_PRIORS: [f64; NUM_SYMPTOMS] = [0.55, 0.55, 0.5, 0.45, 0.25, 0.45, 0.5, 0.4, 0.35, 0.25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub recordings_per_speaker: usize,
    pub seconds_per_recording: f64,
    pub frame_hop_seconds: f64,
    #[serde(rename = "stream")]
    pub streams: Vec<SynthStream>,
    pub symptom_priors: [f64; NUM_SYMPTOMS],
    pub signal_strength: f64,
    pub noise_scale: f64,
    /// Standard deviation of the per-speaker offset; half the noise scale when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speaker_scale: Option<f64>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_speakers: 200,
            recordings_per_speaker: 1,
            seconds_per_recording: 60.0,
            frame_hop_seconds: 0.5,
            streams: vec![SynthStream {
                name: "ssl".into(),
                dim: 64,
            }],
            symptom_priors: DEFAULT_PRIORS,
            signal_strength: 3.0,
            noise_scale: 1.0,
            speaker_scale: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_speakers == 0 || self.recordings_per_speaker == 0 {
            return bad("need at least one speaker and one recording per speaker".into());
        }
        if !(self.seconds_per_recording > 0.0 && self.frame_hop_seconds > 0.0) {
            return bad("recording length and frame hop must be positive".into());
        }
        if (self.seconds_per_recording / self.frame_hop_seconds).round() < 1.0 {
            return bad("recordings would have no frames".into());
        }
        if self.streams.is_empty() {
            return bad("no streams".into());
        }
        for s in &self.streams {
            if s.dim == 0 {
                return bad(format!("stream `{}` has zero dim", s.name));
            }
        }
        let mut names: Vec<&str> = self.streams.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.streams.len() {
            return bad("duplicate stream names".into());
        }
        for (s, p) in Symptom::ALL.iter().zip(self.symptom_priors) {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("prior for {} must lie in (0, 1), got {p}", s.abbr()));
            }
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad(format!("signal strength must be >= 0, got {}", self.signal_strength));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise scale must be >= 0, got {}", self.noise_scale));
        }
        if let Some(s) = self.speaker_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("speaker scale must be >= 0, got {s}"));
            }
        }
        Ok(())
    }

    pub fn frames_per_recording(&self) -> usize {
        (self.seconds_per_recording / self.frame_hop_seconds).round() as usize
    }
}

/// Generated recordings and their streams, held in memory.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub recordings: Vec<Recording>,
    /// Per recording, stream name to features.
    pub features: Vec<BTreeMap<String, FeatureSequence>>,
}

fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// One unit vector per symptom. When `dim >= 10` they are mutually orthogonal
/// (Gram-Schmidt on Gaussian draws); otherwise only normalized.
pub fn symptom_directions(dim: usize, seed: u64, stream: &str) -> Vec<Vec<f64>> {
    let mut rng = derived_rng(seed, &format!("directions/{stream}"));
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(NUM_SYMPTOMS);
    for _ in 0..NUM_SYMPTOMS {
        let mut v = gaussian(&mut rng, dim);
        if dim >= NUM_SYMPTOMS {
            for u in &dirs {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        normalize(&mut v);
        dirs.push(v);
    }
    dirs
}

fn draw_scores(rng: &mut impl Rng, priors: &[f64; NUM_SYMPTOMS]) -> [u8; NUM_SYMPTOMS] {
    let mut scores = [0u8; NUM_SYMPTOMS];
    for (score, &p) in scores.iter_mut().zip(priors) {
        *score = if rng.random::<f64>() < p {
            rng.random_range(2..=6)
        } else {
            rng.random_range(0..=1)
        };
    }
    scores
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let speaker_scale = cfg.speaker_scale.unwrap_or(0.5 * cfg.noise_scale);
    let frames = cfg.frames_per_recording();
    let directions: Vec<Vec<Vec<f64>>> = cfg
        .streams
        .iter()
        .map(|s| symptom_directions(s.dim, cfg.seed, &s.name))
        .collect();

    let mut recordings = Vec::new();
    let mut features = Vec::new();
    for spk in 0..cfg.n_speakers {
        let speaker_id = format!("spk{spk:04}");
        let offsets: Vec<Vec<f64>> = cfg
            .streams
            .iter()
            .map(|s| {
                let mut rng = derived_rng(cfg.seed, &format!("speaker/{speaker_id}/{}", s.name));
                gaussian(&mut rng, s.dim).into_iter().map(|x| x * speaker_scale).collect()
            })
            .collect();
        for r in 0..cfg.recordings_per_speaker {
            let recording_id = format!("{speaker_id}_r{r}");
            let scores = draw_scores(&mut derived_rng(cfg.seed, &format!("scores/{recording_id}")), &cfg.symptom_priors);
            let total: u8 = scores.iter().sum();
            let mut streams = BTreeMap::new();
            let mut refs = BTreeMap::new();
            for ((stream, dirs), offset) in cfg.streams.iter().zip(&directions).zip(&offsets) {
                let mut mean = offset.clone();
                for (s, &score) in scores.iter().enumerate() {
                    if score >= 2 {
                        mean.iter_mut()
                            .zip(&dirs[s])
                            .for_each(|(m, u)| *m += cfg.signal_strength * u);
                    }
                }
                let mut rng = derived_rng(cfg.seed, &format!("frames/{recording_id}/{}", stream.name));
                let mut values = Vec::with_capacity(frames * stream.dim);
                for _ in 0..frames {
                    for m in &mean {
                        let n: f64 = rng.sample(StandardNormal);
                        values.push((m + cfg.noise_scale * n) as f32);
                    }
                }
                streams.insert(
                    stream.name.clone(),
                    FeatureSequence::new(stream.name.clone(), stream.dim, values, cfg.frame_hop_seconds)?,
                );
                refs.insert(stream.name.clone(), PathBuf::from(format!("emb/{}/{recording_id}.emb", stream.name)));
            }
            recordings.push(Recording {
                recording_id,
                speaker_id: speaker_id.clone(),
                audio_ref: None,
                feature_refs: refs,
                symptom_scores: scores,
                madrs_total: total,
            });
            features.push(streams);
        }
    }
    Ok(SynthDataset { recordings, features })
}

impl SynthDataset {
    /// Model-ready segments without touching the disk.
    pub fn corpus(&self, spec: &ModelSpec) -> Result<Corpus> {
        let index: BTreeMap<&str, usize> = self
            .recordings
            .iter()
            .enumerate()
            .map(|(i, r)| (r.recording_id.as_str(), i))
            .collect();
        Corpus::build(self.recordings.clone(), spec, |rec, stream| {
            self.features[index[rec.recording_id.as_str()]]
                .get(&stream.name)
                .cloned()
                .ok_or_else(|| Error::MissingStream {
                    recording: rec.recording_id.clone(),
                    stream: stream.name.clone(),
                })
        })
    }

    /// Writes `manifest.csv` and one EMB1 file per recording and stream under `dir`.
    /// Returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        for (rec, streams) in self.recordings.iter().zip(&self.features) {
            for (name, seq) in streams {
                let path = dir.join(&rec.feature_refs[name]);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                write_embedding_file(seq, &path)?;
            }
        }
        let manifest = dir.join("manifest.csv");
        let f = std::fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
        write_manifest(std::io::BufWriter::new(f), &self.recordings)?;
        Ok(manifest)
    }
}
