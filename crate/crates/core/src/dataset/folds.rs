use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::dataset::Recording;
use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Speaker-to-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn speakers_in(&self, fold: usize) -> BTreeSet<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    pub fn fold_of(&self, speaker: &str) -> Option<usize> {
        self.assignment.get(speaker).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles the distinct speakers with a seeded generator and deals them round-robin.
pub fn make_folds(recordings: &[Recording], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be >= 2, got {k}")));
    }
    let speakers: BTreeSet<&str> = recordings.iter().map(|r| r.speaker_id.as_str()).collect();
    if speakers.len() < k {
        return Err(Error::invalid(format!(
            "{} distinct speakers cannot fill {k} folds",
            speakers.len()
        )));
    }
    let mut order: Vec<&str> = speakers.into_iter().collect();
    order.shuffle(&mut rng_from(seed));
    let assignment = order
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i % k))
        .collect();
    Ok(FoldPlan { k, seed, assignment })
}

/// Disjoint train/validation/test recording ids for one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitView {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Test = recordings of `test_fold`'s speakers. Validation takes whole speakers from the
/// remaining pool, in seeded random order, until it holds at least `val_fraction` of the
/// pool's recordings. Id lists keep manifest order.
pub fn split_for_fold(
    plan: &FoldPlan,
    recordings: &[Recording],
    test_fold: usize,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitView> {
    if test_fold >= plan.k {
        return Err(Error::invalid(format!(
            "test fold {test_fold} out of range for k={}",
            plan.k
        )));
    }
    if !(val_fraction > 0.0 && val_fraction <= 0.5) {
        return Err(Error::invalid(format!(
            "validation fraction {val_fraction} outside (0, 0.5]"
        )));
    }

    let mut per_speaker: BTreeMap<&str, usize> = BTreeMap::new();
    for rec in recordings {
        let fold = plan.fold_of(&rec.speaker_id).ok_or_else(|| {
            Error::invalid(format!("speaker `{}` is not in the fold plan", rec.speaker_id))
        })?;
        if fold != test_fold {
            *per_speaker.entry(rec.speaker_id.as_str()).or_default() += 1;
        }
    }
    let pool_size: usize = per_speaker.values().sum();
    let target = val_fraction * pool_size as f64;

    let mut candidates: Vec<&str> = per_speaker.keys().copied().collect();
    candidates.shuffle(&mut rng_from(seed));
    let mut val_speakers = BTreeSet::new();
    let mut taken = 0usize;
    for spk in candidates.iter().take(candidates.len().saturating_sub(1)) {
        if taken as f64 >= target {
            break;
        }
        taken += per_speaker[spk];
        val_speakers.insert(*spk);
    }
    if per_speaker.len() == val_speakers.len() {
        return Err(Error::invalid("no training speakers left after validation split"));
    }

    let mut view = SplitView {
        train_ids: Vec::new(),
        val_ids: Vec::new(),
        test_ids: Vec::new(),
    };
    for rec in recordings {
        let id = rec.recording_id.clone();
        if plan.fold_of(&rec.speaker_id) == Some(test_fold) {
            view.test_ids.push(id);
        } else if val_speakers.contains(rec.speaker_id.as_str()) {
            view.val_ids.push(id);
        } else {
            view.train_ids.push(id);
        }
    }
    Ok(view)
}

/// Serializes as `# seed=<seed> k=<k>` followed by `speaker_id,fold_index` rows.
pub fn write_fold_plan<W: Write>(mut w: W, plan: &FoldPlan) -> std::io::Result<()> {
    writeln!(w, "# seed={} k={}", plan.seed, plan.k)?;
    writeln!(w, "speaker_id,fold_index")?;
    for (spk, fold) in &plan.assignment {
        writeln!(w, "{spk},{fold}")?;
    }
    Ok(())
}

pub fn read_fold_plan<R: BufRead>(r: R) -> Result<FoldPlan> {
    let mut seed = None;
    let mut k = None;
    let mut assignment = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<fold plan>", e))?;
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            for tok in comment.split_whitespace() {
                match tok.split_once('=') {
                    Some(("seed", v)) => seed = v.parse().ok(),
                    Some(("k", v)) => k = v.parse().ok(),
                    _ => {}
                }
            }
            continue;
        }
        if line.is_empty() || line == "speaker_id,fold_index" {
            continue;
        }
        let (spk, fold) = line.split_once(',').ok_or_else(|| Error::Ingest {
            row: i + 1,
            field: "fold_index".into(),
            message: "expected `speaker_id,fold_index`".into(),
        })?;
        let fold: usize = fold.trim().parse().map_err(|_| Error::Ingest {
            row: i + 1,
            field: "fold_index".into(),
            message: format!("`{fold}` is not a fold index"),
        })?;
        assignment.insert(spk.trim().to_string(), fold);
    }
    let k = k
        .or_else(|| assignment.values().max().map(|m| m + 1))
        .ok_or_else(|| Error::invalid("empty fold plan"))?;
    if assignment.values().any(|&f| f >= k) {
        return Err(Error::invalid("fold index exceeds k"));
    }
    Ok(FoldPlan {
        k,
        seed: seed.ok_or_else(|| Error::invalid("fold plan lacks a `# seed=` header"))?,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recs(speakers: usize, per_speaker: usize) -> Vec<Recording> {
        (0..speakers)
            .flat_map(|s| {
                (0..per_speaker).map(move |j| Recording {
                    recording_id: format!("s{s}_r{j}"),
                    speaker_id: format!("s{s}"),
                    audio_ref: None,
                    feature_refs: BTreeMap::new(),
                    symptom_scores: [0; 10],
                    madrs_total: 0,
                })
            })
            .collect()
    }

    #[test]
    fn paper_sized_plan() {
        let plan = make_folds(&recs(505, 1), 5, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![101; 5]);
    }

    #[test]
    fn ten_speakers_five_folds() {
        let plan = make_folds(&recs(10, 3), 5, 9).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
    }

    #[test]
    fn deterministic_for_seed() {
        let r = recs(37, 2);
        assert_eq!(make_folds(&r, 5, 3).unwrap(), make_folds(&r, 5, 3).unwrap());
        assert_ne!(make_folds(&r, 5, 3).unwrap(), make_folds(&r, 5, 4).unwrap());
    }

    #[test]
    fn too_few_speakers() {
        assert!(make_folds(&recs(4, 5), 5, 0).is_err());
        assert!(make_folds(&recs(4, 5), 1, 0).is_err());
    }

    #[test]
    fn test_fold_is_exactly_the_fold_speakers() {
        let r = recs(20, 2);
        let plan = make_folds(&r, 5, 11).unwrap();
        let view = split_for_fold(&plan, &r, 0, 0.1, 5).unwrap();
        let fold0 = plan.speakers_in(0);
        let test_speakers: BTreeSet<&str> = view
            .test_ids
            .iter()
            .map(|id| id.split('_').next().unwrap())
            .collect();
        assert_eq!(test_speakers, fold0);
    }

    #[test]
    fn validation_reaches_fraction_with_whole_speakers() {
        // 100 speakers x 5 recordings: 400 pool recordings outside the test fold.
        let r = recs(100, 5);
        let plan = make_folds(&r, 5, 2).unwrap();
        let view = split_for_fold(&plan, &r, 3, 0.10, 8).unwrap();
        assert_eq!(view.train_ids.len() + view.val_ids.len(), 400);
        assert!(view.val_ids.len() >= 40);
        // Count recordings per sampled speaker: every validation speaker is complete.
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for id in &view.val_ids {
            *counts.entry(id.split('_').next().unwrap()).or_default() += 1;
        }
        assert!(counts.values().all(|&c| c == 5));
        assert_eq!(counts.values().sum::<usize>(), view.val_ids.len());
    }

    #[test]
    fn bad_arguments() {
        let r = recs(10, 1);
        let plan = make_folds(&r, 5, 0).unwrap();
        assert!(split_for_fold(&plan, &r, 5, 0.1, 0).is_err());
        assert!(split_for_fold(&plan, &r, 0, 0.0, 0).is_err());
        assert!(split_for_fold(&plan, &r, 0, 0.6, 0).is_err());
    }

    #[test]
    fn plan_serialization_round_trips() {
        let plan = make_folds(&recs(13, 1), 3, 77).unwrap();
        let mut buf = Vec::new();
        write_fold_plan(&mut buf, &plan).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# seed=77 k=3\n"));
        assert_eq!(read_fold_plan(buf.as_slice()).unwrap(), plan);
    }

    proptest! {
        #[test]
        fn folds_partition_speakers(
            n_speakers in 5usize..60,
            per in proptest::collection::vec(1usize..4, 60),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let r: Vec<Recording> = (0..n_speakers)
                .flat_map(|s| recs(1, per[s]).into_iter().map(move |mut rec| {
                    rec.recording_id = format!("s{s}_{}", rec.recording_id);
                    rec.speaker_id = format!("s{s}");
                    rec
                }))
                .collect();
            let plan = make_folds(&r, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(plan.assignment.len(), n_speakers);
            for a in 0..k {
                for b in (a + 1)..k {
                    prop_assert!(plan.speakers_in(a).is_disjoint(&plan.speakers_in(b)));
                }
            }
            for fold in 0..k {
                let view = split_for_fold(&plan, &r, fold, 0.1, seed ^ 1).unwrap();
                let spk = |ids: &[String]| -> BTreeSet<String> {
                    ids.iter().map(|id| id.split('_').next().unwrap().to_string()).collect()
                };
                let (tr, va, te) = (spk(&view.train_ids), spk(&view.val_ids), spk(&view.test_ids));
                prop_assert!(tr.is_disjoint(&va));
                prop_assert!(tr.is_disjoint(&te));
                prop_assert!(va.is_disjoint(&te));
                prop_assert!(!tr.is_empty());
                prop_assert_eq!(view.train_ids.len() + view.val_ids.len() + view.test_ids.len(), r.len());
            }
        }
    }
}
