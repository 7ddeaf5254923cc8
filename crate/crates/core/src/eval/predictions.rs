use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::{BinaryLabels, Recording, Symptom, NUM_SYMPTOMS};
use crate::error::{Error, Result};
use crate::eval::{aggregate_severity, majority_vote};
use crate::models::SegmentOutput;

/// Recording-level outputs of one or more models for a recording, with its true ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingPrediction {
    pub recording_id: String,
    pub speaker_id: String,
    pub fold: usize,
    /// Majority-voted decision per symptom head that was run.
    pub decisions: [Option<bool>; NUM_SYMPTOMS],
    /// Severity estimate on the 0-60 scale.
    pub severity: Option<f64>,
    pub labels: BinaryLabels,
    pub madrs_total: u8,
}

/// Aggregates segment outputs into one prediction per recording. A segment counts
/// as "present" when the head's present probability is at least 0.5.
pub fn aggregate_recordings(
    recordings: &[&Recording],
    recording_of: &[usize],
    outputs: &[SegmentOutput],
    severity_scale: f64,
    fold: usize,
) -> Result<Vec<RecordingPrediction>> {
    if recording_of.len() != outputs.len() {
        return Err(Error::shape(format!(
            "{} segment outputs for {} segments",
            outputs.len(),
            recording_of.len()
        )));
    }
    let mut grouped: Vec<Vec<&SegmentOutput>> = vec![Vec::new(); recordings.len()];
    for (&r, out) in recording_of.iter().zip(outputs) {
        grouped
            .get_mut(r)
            .ok_or_else(|| Error::invalid(format!("segment refers to recording {r}")))?
            .push(out);
    }
    recordings
        .iter()
        .zip(&grouped)
        .map(|(rec, segs)| {
            if segs.is_empty() {
                return Err(Error::invalid(format!("recording `{}` has no segments", rec.recording_id)));
            }
            let mut decisions = [None; NUM_SYMPTOMS];
            for (i, slot) in decisions.iter_mut().enumerate() {
                if segs[0].present[i].is_some() {
                    let votes: Vec<bool> = segs.iter().map(|s| s.present[i].unwrap_or(0.0) >= 0.5).collect();
                    *slot = Some(majority_vote(&votes)?);
                }
            }
            let severity = match segs[0].severity {
                Some(_) => {
                    let v: Vec<f64> = segs.iter().map(|s| s.severity.unwrap_or(0.0)).collect();
                    Some(aggregate_severity(&v, severity_scale)?)
                }
                None => None,
            };
            Ok(RecordingPrediction {
                recording_id: rec.recording_id.clone(),
                speaker_id: rec.speaker_id.clone(),
                fold,
                decisions,
                severity,
                labels: rec.labels(),
                madrs_total: rec.madrs_total,
            })
        })
        .collect()
}

/// Recording-level predictions, kept sorted by recording id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    rows: Vec<RecordingPrediction>,
}

impl PredictionSet {
    pub fn new(mut rows: Vec<RecordingPrediction>) -> Result<Self> {
        rows.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
        if let Some(w) = rows.windows(2).find(|w| w[0].recording_id == w[1].recording_id) {
            return Err(Error::invalid(format!("duplicate prediction for `{}`", w[0].recording_id)));
        }
        Ok(PredictionSet { rows })
    }

    pub fn rows(&self) -> &[RecordingPrediction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Symptoms for which every recording has a decision.
    pub fn symptoms(&self) -> Vec<Symptom> {
        Symptom::ALL
            .into_iter()
            .filter(|s| !self.rows.is_empty() && self.rows.iter().all(|r| r.decisions[s.index()].is_some()))
            .collect()
    }

    pub fn has_severity(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.severity.is_some())
    }

    pub fn folds(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.rows.iter().map(|r| r.fold).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Fills empty columns from `other`, which must cover the same recordings. Used to
    /// assemble the outputs of separately trained single-task models.
    pub fn merge(&mut self, other: &[RecordingPrediction]) -> Result<()> {
        let index: BTreeMap<&str, &RecordingPrediction> = other.iter().map(|r| (r.recording_id.as_str(), r)).collect();
        if index.len() != self.rows.len() {
            return Err(Error::invalid("merged prediction sets cover different recordings"));
        }
        for row in &mut self.rows {
            let o = index
                .get(row.recording_id.as_str())
                .ok_or_else(|| Error::invalid(format!("`{}` missing from merged predictions", row.recording_id)))?;
            for (mine, theirs) in row.decisions.iter_mut().zip(o.decisions) {
                if mine.is_none() {
                    *mine = theirs;
                }
            }
            if row.severity.is_none() {
                row.severity = o.severity;
            }
        }
        Ok(())
    }

    /// Rows for one fold.
    pub fn fold_rows(&self, fold: usize) -> Vec<&RecordingPrediction> {
        self.rows.iter().filter(|r| r.fold == fold).collect()
    }

    /// Errors unless both sets cover the same recordings with the same labels.
    pub fn check_same_coverage(&self, other: &PredictionSet) -> Result<()> {
        if self.rows.len() != other.rows.len() {
            return Err(Error::invalid(format!(
                "prediction sets cover {} and {} recordings",
                self.rows.len(),
                other.rows.len()
            )));
        }
        for (a, b) in self.rows.iter().zip(&other.rows) {
            if a.recording_id != b.recording_id {
                return Err(Error::invalid(format!(
                    "recording `{}` is not in both prediction sets",
                    a.recording_id.as_str().min(b.recording_id.as_str())
                )));
            }
            if a.labels != b.labels || a.madrs_total != b.madrs_total {
                return Err(Error::invalid(format!("labels for `{}` differ", a.recording_id)));
            }
        }
        Ok(())
    }
}

fn header() -> Vec<String> {
    let mut h = vec!["recording_id".to_string(), "speaker_id".into(), "fold".into()];
    h.extend(Symptom::ALL.iter().map(|s| format!("pred_{}", s.abbr())));
    h.push("pred_madrs".into());
    h.extend(Symptom::ALL.iter().map(|s| format!("true_{}", s.abbr())));
    h.push("true_madrs".into());
    h
}

pub fn write_predictions<W: Write>(w: W, set: &PredictionSet) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header())?;
    for r in &set.rows {
        let mut rec = vec![r.recording_id.clone(), r.speaker_id.clone(), r.fold.to_string()];
        rec.extend(r.decisions.iter().map(|d| d.map_or(String::new(), |b| u8::from(b).to_string())));
        rec.push(r.severity.map_or(String::new(), |v| format!("{v:.6}")));
        rec.extend(Symptom::ALL.iter().map(|s| u8::from(r.labels.get(*s)).to_string()));
        rec.push(r.madrs_total.to_string());
        out.write_record(rec)?;
    }
    out.flush().map_err(|e| Error::io("<predictions>", e))
}

fn parse_flag(field: &str, row: usize) -> Result<Option<bool>> {
    match field.trim() {
        "" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(Error::Table {
            row,
            message: format!("expected 0, 1 or empty, got `{other}`"),
        }),
    }
}

pub fn read_predictions<R: Read>(r: R) -> Result<PredictionSet> {
    let mut rdr = csv::Reader::from_reader(r);
    let expected = header();
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(Error::Table {
            row: 1,
            message: "unexpected prediction file header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |message: String| Error::Table { row, message };
        let fold = rec[2].parse().map_err(|_| bad(format!("bad fold `{}`", &rec[2])))?;
        let mut decisions = [None; NUM_SYMPTOMS];
        let mut present = [false; NUM_SYMPTOMS];
        for i in 0..NUM_SYMPTOMS {
            decisions[i] = parse_flag(&rec[3 + i], row)?;
            present[i] = parse_flag(&rec[4 + NUM_SYMPTOMS + i], row)?.ok_or_else(|| bad("missing true label".into()))?;
        }
        let sev = &rec[3 + NUM_SYMPTOMS];
        let severity = if sev.trim().is_empty() {
            None
        } else {
            Some(sev.trim().parse().map_err(|_| bad(format!("bad severity `{sev}`")))?)
        };
        let total = &rec[4 + 2 * NUM_SYMPTOMS];
        rows.push(RecordingPrediction {
            recording_id: rec[0].to_string(),
            speaker_id: rec[1].to_string(),
            fold,
            decisions,
            severity,
            labels: BinaryLabels { present },
            madrs_total: total.trim().parse().map_err(|_| bad(format!("bad MADRS total `{total}`")))?,
        });
    }
    PredictionSet::new(rows)
}

pub fn write_predictions_file(path: &Path, set: &PredictionSet) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(std::io::BufWriter::new(f), set)
}

pub fn read_predictions_file(path: &Path) -> Result<PredictionSet> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, d: Option<bool>, sev: Option<f64>, present: bool) -> RecordingPrediction {
        RecordingPrediction {
            recording_id: id.into(),
            speaker_id: format!("spk_{id}"),
            fold: 1,
            decisions: [d; NUM_SYMPTOMS],
            severity: sev,
            labels: BinaryLabels {
                present: [present; NUM_SYMPTOMS],
            },
            madrs_total: 17,
        }
    }

    #[test]
    fn csv_round_trip() {
        let set = PredictionSet::new(vec![
            row("b", Some(true), Some(21.5), true),
            row("a", None, None, false),
        ])
        .unwrap();
        assert_eq!(set.rows()[0].recording_id, "a");
        let mut buf = Vec::new();
        write_predictions(&mut buf, &set).unwrap();
        assert_eq!(read_predictions(&buf[..]).unwrap(), set);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("recording_id,speaker_id,fold,pred_ASad,"));
    }

    #[test]
    fn merge_fills_columns() {
        let mut a = PredictionSet::new(vec![row("x", None, Some(3.0), true)]).unwrap();
        a.merge(&[row("x", Some(false), Some(9.0), true)]).unwrap();
        assert_eq!(a.rows()[0].decisions, [Some(false); NUM_SYMPTOMS]);
        assert_eq!(a.rows()[0].severity, Some(3.0));
        assert!(a.merge(&[row("y", None, None, true)]).is_err());
    }

    #[test]
    fn aggregation() {
        let rec = Recording {
            recording_id: "r".into(),
            speaker_id: "s".into(),
            audio_ref: None,
            feature_refs: Default::default(),
            symptom_scores: [2, 0, 0, 0, 0, 0, 0, 0, 0, 0],
            madrs_total: 2,
        };
        let seg = |p: f64, s: f64| SegmentOutput {
            present: [Some(p); NUM_SYMPTOMS],
            severity: Some(s),
        };
        let outs = [seg(0.9, 0.1), seg(0.2, 0.3), seg(0.6, 0.2)];
        let preds = aggregate_recordings(&[&rec], &[0, 0, 0], &outs, 60.0, 2).unwrap();
        assert_eq!(preds[0].decisions[0], Some(true));
        assert!((preds[0].severity.unwrap() - 12.0).abs() < 1e-9);
        assert!(aggregate_recordings(&[&rec], &[], &[], 60.0, 0).is_err());
    }
}
