use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::dataset::{Recording, MAX_MADRS_TOTAL, MAX_SYMPTOM_SCORE, NUM_SYMPTOMS};
use crate::error::{Error, Result};

const STREAM_PREFIX: &str = "emb:";

/// Parsed manifest plus non-fatal findings (e.g. totals that disagree with the item sum).
#[derive(Debug, Clone, Default)]
pub struct ManifestRead {
    pub recordings: Vec<Recording>,
    pub warnings: Vec<String>,
}

/// Reads a manifest file, logging warnings.
pub fn load_manifest(path: &Path) -> Result<Vec<Recording>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let read = read_manifest(file)?;
    for w in &read.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(read.recordings)
}

struct Columns {
    recording_id: usize,
    speaker_id: usize,
    audio_path: usize,
    scores: [usize; NUM_SYMPTOMS],
    total: usize,
    streams: Vec<(String, usize)>,
}

impl Columns {
    fn locate(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Ingest {
                    row: 1,
                    field: name.to_string(),
                    message: "missing column".into(),
                })
        };
        let mut scores = [0usize; NUM_SYMPTOMS];
        for (i, slot) in scores.iter_mut().enumerate() {
            *slot = find(&format!("s{}", i + 1))?;
        }
        let streams = header
            .iter()
            .enumerate()
            .filter_map(|(i, h)| {
                h.trim()
                    .strip_prefix(STREAM_PREFIX)
                    .map(|name| (name.to_string(), i))
            })
            .collect();
        Ok(Columns {
            recording_id: find("recording_id")?,
            speaker_id: find("speaker_id")?,
            audio_path: find("audio_path")?,
            scores,
            total: find("madrs_total")?,
            streams,
        })
    }
}

fn parse_score(raw: &str, row: usize, field: &str, max: u8) -> Result<u8> {
    let value: i64 = raw.trim().parse().map_err(|_| Error::Ingest {
        row,
        field: field.to_string(),
        message: format!("`{raw}` is not an integer"),
    })?;
    if !(0..=i64::from(max)).contains(&value) {
        return Err(Error::Ingest {
            row,
            field: field.to_string(),
            message: format!("value {value} outside 0-{max}"),
        });
    }
    Ok(value as u8)
}

/// Parses manifest text. Rows are reported by their 1-based line number.
pub fn read_manifest<R: Read>(reader: R) -> Result<ManifestRead> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = Columns::locate(&header)?;

    let mut out = ManifestRead::default();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |idx: usize, name: &str| {
            record.get(idx).ok_or_else(|| Error::Ingest {
                row,
                field: name.to_string(),
                message: "missing value".into(),
            })
        };

        let recording_id = field(cols.recording_id, "recording_id")?.trim().to_string();
        if recording_id.is_empty() {
            return Err(Error::Ingest {
                row,
                field: "recording_id".into(),
                message: "empty id".into(),
            });
        }
        if !seen.insert(recording_id.clone()) {
            return Err(Error::Ingest {
                row,
                field: "recording_id".into(),
                message: format!("duplicate id `{recording_id}`"),
            });
        }
        let speaker_id = field(cols.speaker_id, "speaker_id")?.trim().to_string();
        if speaker_id.is_empty() {
            return Err(Error::Ingest {
                row,
                field: "speaker_id".into(),
                message: "empty id".into(),
            });
        }
        let audio = field(cols.audio_path, "audio_path")?.trim();
        let audio_ref = (!audio.is_empty()).then(|| PathBuf::from(audio));

        let mut symptom_scores = [0u8; NUM_SYMPTOMS];
        for (i, &idx) in cols.scores.iter().enumerate() {
            let name = format!("s{}", i + 1);
            symptom_scores[i] = parse_score(field(idx, &name)?, row, &name, MAX_SYMPTOM_SCORE)?;
        }
        let madrs_total = parse_score(
            field(cols.total, "madrs_total")?,
            row,
            "madrs_total",
            MAX_MADRS_TOTAL,
        )?;

        let mut feature_refs = BTreeMap::new();
        for (name, idx) in &cols.streams {
            let value = field(*idx, &format!("{STREAM_PREFIX}{name}"))?.trim();
            if !value.is_empty() {
                feature_refs.insert(name.clone(), PathBuf::from(value));
            }
        }

        let rec = Recording {
            recording_id,
            speaker_id,
            audio_ref,
            feature_refs,
            symptom_scores,
            madrs_total,
        };
        if rec.score_sum() != u32::from(rec.madrs_total) {
            out.warnings.push(format!(
                "row {row}: madrs_total {} differs from item sum {}",
                rec.madrs_total,
                rec.score_sum()
            ));
        }
        out.recordings.push(rec);
    }
    Ok(out)
}

/// Writes recordings in manifest format. Stream columns are the sorted union of all streams.
pub fn write_manifest<W: Write>(writer: W, recordings: &[Recording]) -> Result<()> {
    let streams: BTreeSet<&str> = recordings
        .iter()
        .flat_map(|r| r.feature_refs.keys().map(String::as_str))
        .collect();
    let mut wtr = csv::Writer::from_writer(writer);

    let mut header: Vec<String> = vec!["recording_id".into(), "speaker_id".into(), "audio_path".into()];
    header.extend((1..=NUM_SYMPTOMS).map(|i| format!("s{i}")));
    header.push("madrs_total".into());
    header.extend(streams.iter().map(|s| format!("{STREAM_PREFIX}{s}")));
    wtr.write_record(&header)?;

    for rec in recordings {
        let mut row: Vec<String> = vec![
            rec.recording_id.clone(),
            rec.speaker_id.clone(),
            rec.audio_ref
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        ];
        row.extend(rec.symptom_scores.iter().map(|s| s.to_string()));
        row.push(rec.madrs_total.to_string());
        row.extend(streams.iter().map(|s| {
            rec.feature_refs
                .get(*s)
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        }));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<manifest>", e))?;
    Ok(())
}
