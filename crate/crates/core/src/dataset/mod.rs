//! Recordings, MADRS symptom labels, manifests and speaker-independent folds.

mod folds;
mod manifest;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use folds::{make_folds, read_fold_plan, split_for_fold, write_fold_plan, FoldPlan, SplitView};
pub use manifest::{load_manifest, read_manifest, write_manifest, ManifestRead};

pub const NUM_SYMPTOMS: usize = 10;
pub const MAX_SYMPTOM_SCORE: u8 = 6;
pub const MAX_MADRS_TOTAL: u8 = 60;
/// Scores at or above this value count as "symptom present".
pub const PRESENT_THRESHOLD: u8 = 2;

/// The ten MADRS items, in rating-scale order. Serialized as the abbreviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "&'static str")]
pub enum Symptom {
    ApparentSadness,
    ReportedSadness,
    InnerTension,
    ReducedSleep,
    ReducedAppetite,
    ConcentrationDifficulties,
    Lassitude,
    InabilityToFeel,
    PessimisticThoughts,
    SuicidalThoughts,
}

impl Symptom {
    pub const ALL: [Symptom; NUM_SYMPTOMS] = [
        Symptom::ApparentSadness,
        Symptom::ReportedSadness,
        Symptom::InnerTension,
        Symptom::ReducedSleep,
        Symptom::ReducedAppetite,
        Symptom::ConcentrationDifficulties,
        Symptom::Lassitude,
        Symptom::InabilityToFeel,
        Symptom::PessimisticThoughts,
        Symptom::SuicidalThoughts,
    ];

    /// Zero-based position in the rating scale.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Symptom> {
        Self::ALL.get(i).copied()
    }

    pub fn abbr(self) -> &'static str {
        match self {
            Symptom::ApparentSadness => "ASad",
            Symptom::ReportedSadness => "RSad",
            Symptom::InnerTension => "InTen",
            Symptom::ReducedSleep => "RSlp",
            Symptom::ReducedAppetite => "RApp",
            Symptom::ConcentrationDifficulties => "ConD",
            Symptom::Lassitude => "Lass",
            Symptom::InabilityToFeel => "IFeel",
            Symptom::PessimisticThoughts => "PesT",
            Symptom::SuicidalThoughts => "SuiT",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Symptom::ApparentSadness => "Apparent Sadness",
            Symptom::ReportedSadness => "Reported Sadness",
            Symptom::InnerTension => "Inner Tension",
            Symptom::ReducedSleep => "Reduced Sleep",
            Symptom::ReducedAppetite => "Reduced Appetite",
            Symptom::ConcentrationDifficulties => "Concentration Difficulties",
            Symptom::Lassitude => "Lassitude",
            Symptom::InabilityToFeel => "Inability to Feel",
            Symptom::PessimisticThoughts => "Pessimistic Thoughts",
            Symptom::SuicidalThoughts => "Suicidal Thoughts",
        }
    }
}

impl fmt::Display for Symptom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbr())
    }
}

impl FromStr for Symptom {
    type Err = Error;

    /// Accepts the abbreviation (case-insensitive) or a 1-based item number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return n
                .checked_sub(1)
                .and_then(Symptom::from_index)
                .ok_or_else(|| Error::invalid(format!("symptom number {n} outside 1-10")));
        }
        Symptom::ALL
            .into_iter()
            .find(|sym| sym.abbr().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown symptom `{s}`")))
    }
}

impl From<Symptom> for &'static str {
    fn from(s: Symptom) -> Self {
        s.abbr()
    }
}

impl TryFrom<String> for Symptom {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Per-symptom presence, indexed by [`Symptom::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BinaryLabels {
    pub present: [bool; NUM_SYMPTOMS],
}

impl BinaryLabels {
    pub fn get(&self, symptom: Symptom) -> bool {
        self.present[symptom.index()]
    }

    pub fn count_present(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }
}

/// Maps 0-6 item scores to absent (0-1) / present (2-6).
pub fn binarize(scores: &[u8; NUM_SYMPTOMS]) -> Result<BinaryLabels> {
    let mut present = [false; NUM_SYMPTOMS];
    for (i, &score) in scores.iter().enumerate() {
        if score > MAX_SYMPTOM_SCORE {
            return Err(Error::invalid(format!(
                "score {score} for {} outside 0-{MAX_SYMPTOM_SCORE}",
                Symptom::ALL[i]
            )));
        }
        present[i] = score >= PRESENT_THRESHOLD;
    }
    Ok(BinaryLabels { present })
}

/// One speech sample with its clinician ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub recording_id: String,
    pub speaker_id: String,
    pub audio_ref: Option<PathBuf>,
    /// Stream name -> feature file.
    pub feature_refs: BTreeMap<String, PathBuf>,
    pub symptom_scores: [u8; NUM_SYMPTOMS],
    pub madrs_total: u8,
}

impl Recording {
    /// Binary labels; scores are range-checked at construction so this cannot fail.
    pub fn labels(&self) -> BinaryLabels {
        binarize(&self.symptom_scores).expect("scores validated at ingest")
    }

    pub fn score_sum(&self) -> u32 {
        self.symptom_scores.iter().map(|&s| u32::from(s)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        binarize(&self.symptom_scores)?;
        if self.madrs_total > MAX_MADRS_TOTAL {
            return Err(Error::invalid(format!(
                "madrs_total {} outside 0-{MAX_MADRS_TOTAL}",
                self.madrs_total
            )));
        }
        Ok(())
    }
}
