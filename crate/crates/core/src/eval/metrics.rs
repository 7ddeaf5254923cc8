use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absent-class, present-class and macro F-scores, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScores {
    pub absent: f64,
    pub present: f64,
    pub macro_f: f64,
}

impl FScores {
    pub fn new(absent: f64, present: f64) -> Self {
        FScores {
            absent,
            present,
            macro_f: (absent + present) / 2.0,
        }
    }
}

/// The more frequent decision; a tie counts as present.
pub fn majority_vote(decisions: &[bool]) -> Result<bool> {
    if decisions.is_empty() {
        return Err(Error::invalid("majority vote over no segments"));
    }
    let present = decisions.iter().filter(|d| **d).count();
    Ok(2 * present >= decisions.len())
}

/// `scale` times the mean normalized prediction, clamped to [0, scale].
pub fn aggregate_severity(predictions: &[f64], scale: f64) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::invalid("severity aggregation over no segments"));
    }
    let mean = predictions.iter().sum::<f64>() / predictions.len() as f64;
    Ok((scale * mean).clamp(0.0, scale))
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        100.0 * (2 * tp) as f64 / denom as f64
    }
}

/// Per-class F1 over recording-level decisions. A class with no true and no
/// predicted instances scores 0.
pub fn f_scores(decisions: &[bool], labels: &[bool]) -> Result<FScores> {
    if decisions.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} decisions for {} labels",
            decisions.len(),
            labels.len()
        )));
    }
    if decisions.is_empty() {
        return Err(Error::invalid("F-score over no recordings"));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&d, &l) in decisions.iter().zip(labels) {
        match (d, l) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    // For the absent class the roles of fp and fn swap.
    Ok(FScores::new(f1(tn, fn_, fp), f1(tp, fp, fn_)))
}

pub fn rmse(estimates: &[f64], targets: &[f64]) -> Result<f64> {
    if estimates.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} estimates for {} targets",
            estimates.len(),
            targets.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::invalid("RMSE over no recordings"));
    }
    let mse = estimates
        .iter()
        .zip(targets)
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        / estimates.len() as f64;
    Ok(mse.sqrt())
}
