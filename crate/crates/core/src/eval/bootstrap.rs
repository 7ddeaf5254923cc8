use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Symptom;
use crate::error::{Error, Result};
use crate::eval::{f_scores, rmse, PredictionSet, RecordingPrediction};
use crate::seed::{derive_seed, rng_from};

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Macro F-score of one symptom, in percent.
    MacroF(Symptom),
    /// Severity RMSE on the 0-60 scale.
    Rmse,
}

impl Metric {
    pub fn label(&self) -> String {
        match self {
            Metric::MacroF(s) => s.abbr().to_string(),
            Metric::Rmse => "MADRS(RMSE)".into(),
        }
    }

    fn eval(&self, rows: &[&RecordingPrediction]) -> Result<f64> {
        match *self {
            Metric::MacroF(s) => {
                let mut d = Vec::with_capacity(rows.len());
                let mut l = Vec::with_capacity(rows.len());
                for r in rows {
                    d.push(r.decisions[s.index()].ok_or_else(|| {
                        Error::invalid(format!("no {} decision for `{}`", s.abbr(), r.recording_id))
                    })?);
                    l.push(r.labels.get(s));
                }
                Ok(f_scores(&d, &l)?.macro_f)
            }
            Metric::Rmse => {
                let est = rows
                    .iter()
                    .map(|r| r.severity.ok_or_else(|| Error::invalid(format!("no severity for `{}`", r.recording_id))))
                    .collect::<Result<Vec<_>>>()?;
                let truth: Vec<f64> = rows.iter().map(|r| f64::from(r.madrs_total)).collect();
                rmse(&est, &truth)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub metric: String,
    /// Mean of the resampled A − B differences.
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapResult {
    /// The interval excludes zero.
    pub fn significant(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// Linear interpolation between closest ranks of a sorted sample.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of metric(A) − metric(B) over recordings resampled with
/// replacement. Resample `i` draws from its own seed derived from `seed` and `i`,
/// so the result does not depend on thread scheduling.
pub fn bootstrap_compare(
    a: &PredictionSet,
    b: &PredictionSet,
    metric: Metric,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult> {
    if n_resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    a.check_same_coverage(b)?;
    if a.is_empty() {
        return Err(Error::invalid("empty prediction sets"));
    }
    let (ra, rb) = (a.rows(), b.rows());
    let n = ra.len();
    let label = metric.label();
    let mut diffs = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(derive_seed(seed, &format!("{label}/{i}")));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sa: Vec<&RecordingPrediction> = idx.iter().map(|&j| &ra[j]).collect();
            let sb: Vec<&RecordingPrediction> = idx.iter().map(|&j| &rb[j]).collect();
            Ok(metric.eval(&sa)? - metric.eval(&sb)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapResult {
        metric: label,
        mean_diff,
        ci_low: percentile(&diffs, tail),
        ci_high: percentile(&diffs, 1.0 - tail),
        n: n_resamples,
        level,
        seed,
    })
}

/// One comparison per symptom both sets predict, plus RMSE when both have severity.
pub fn compare_all(a: &PredictionSet, b: &PredictionSet, n_resamples: usize, level: f64, seed: u64) -> Result<Vec<BootstrapResult>> {
    a.check_same_coverage(b)?;
    let b_symptoms = b.symptoms();
    let mut metrics: Vec<Metric> = a
        .symptoms()
        .into_iter()
        .filter(|s| b_symptoms.contains(s))
        .map(Metric::MacroF)
        .collect();
    if a.has_severity() && b.has_severity() {
        metrics.push(Metric::Rmse);
    }
    metrics
        .into_iter()
        .map(|m| bootstrap_compare(a, b, m, n_resamples, level, seed))
        .collect()
}

pub fn bootstrap_csv(results: &[BootstrapResult]) -> String {
    let mut out = String::from("symptom,mean_diff,ci_low,ci_high,n,level,seed,significant\n");
    for r in results {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{},{},{},{}\n",
            r.metric,
            r.mean_diff,
            r.ci_low,
            r.ci_high,
            r.n,
            r.level,
            r.seed,
            r.significant()
        ));
    }
    out
}
