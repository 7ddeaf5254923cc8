use serde::{Deserialize, Serialize};

use crate::dataset::{Symptom, NUM_SYMPTOMS};
use crate::error::{Error, Result};
use crate::eval::{f_scores, rmse, FScores, PredictionSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub recordings: usize,
    pub symptoms: [Option<FScores>; NUM_SYMPTOMS],
    pub rmse: Option<f64>,
}

/// Per-fold scores and their means across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub folds: Vec<FoldMetrics>,
    pub mean: [Option<FScores>; NUM_SYMPTOMS],
    pub mean_rmse: Option<f64>,
}

impl MetricsReport {
    pub fn symptom(&self, s: Symptom) -> Option<FScores> {
        self.mean[s.index()]
    }
}

/// Scores each fold's recordings separately, then averages over folds.
pub fn score_predictions(preds: &PredictionSet, label: &str) -> Result<MetricsReport> {
    if preds.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    let symptoms = preds.symptoms();
    let mut folds = Vec::new();
    for fold in preds.folds() {
        let rows = preds.fold_rows(fold);
        let mut scores = [None; NUM_SYMPTOMS];
        for s in &symptoms {
            let d: Vec<bool> = rows.iter().map(|r| r.decisions[s.index()].unwrap_or(false)).collect();
            let l: Vec<bool> = rows.iter().map(|r| r.labels.get(*s)).collect();
            scores[s.index()] = Some(f_scores(&d, &l)?);
        }
        let fold_rmse = if preds.has_severity() {
            let est: Vec<f64> = rows.iter().map(|r| r.severity.unwrap_or(0.0)).collect();
            let t: Vec<f64> = rows.iter().map(|r| f64::from(r.madrs_total)).collect();
            Some(rmse(&est, &t)?)
        } else {
            None
        };
        folds.push(FoldMetrics {
            fold,
            recordings: rows.len(),
            symptoms: scores,
            rmse: fold_rmse,
        });
    }
    let k = folds.len() as f64;
    let mut mean = [None; NUM_SYMPTOMS];
    for s in &symptoms {
        let a = folds.iter().filter_map(|f| f.symptoms[s.index()]).map(|f| f.absent).sum::<f64>() / k;
        let p = folds.iter().filter_map(|f| f.symptoms[s.index()]).map(|f| f.present).sum::<f64>() / k;
        mean[s.index()] = Some(FScores::new(a, p));
    }
    let mean_rmse = preds
        .has_severity()
        .then(|| folds.iter().filter_map(|f| f.rmse).sum::<f64>() / k);
    Ok(MetricsReport {
        label: label.to_string(),
        folds,
        mean,
        mean_rmse,
    })
}

fn round(v: f64) -> i64 {
    v.round() as i64
}

/// "F_M (F_A, F_P)" with integer rounding.
pub fn format_cell(f: &FScores) -> String {
    format!("{} ({}, {})", round(f.macro_f), round(f.absent), round(f.present))
}

/// Integer-rounded fused F_M with its change against the best single model.
pub fn format_delta(fused: f64, best_single: f64) -> String {
    let d = round(fused) - round(best_single);
    match d.signum() {
        1 => format!("{} ({}↑)", round(fused), d),
        -1 => format!("{} ({}↓)", round(fused), -d),
        _ => round(fused).to_string(),
    }
}

/// RMSE with its change against the lowest single-model RMSE.
pub fn format_rmse_delta(fused: f64, best_single: f64) -> String {
    let d = (fused * 100.0).round() / 100.0 - (best_single * 100.0).round() / 100.0;
    if d.abs() < 0.005 {
        format!("{fused:.2}")
    } else if d > 0.0 {
        format!("{fused:.2} ({d:.2}↑)")
    } else {
        format!("{fused:.2} ({:.2}↓)", -d)
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s}{}", " ".repeat(widths[c] - s.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Mean scores per symptom for each report, one column per report.
pub fn render_table2(reports: &[&MetricsReport]) -> String {
    let mut rows = vec![std::iter::once("Symptom".to_string())
        .chain(reports.iter().map(|r| r.label.clone()))
        .collect::<Vec<_>>()];
    for s in Symptom::ALL {
        if reports.iter().all(|r| r.mean[s.index()].is_none()) {
            continue;
        }
        let mut row = vec![s.abbr().to_string()];
        row.extend(reports.iter().map(|r| r.mean[s.index()].map_or("-".into(), |f| format_cell(&f))));
        rows.push(row);
    }
    if reports.iter().any(|r| r.mean_rmse.is_some()) {
        let mut row = vec!["MADRS(RMSE)".to_string()];
        row.extend(reports.iter().map(|r| r.mean_rmse.map_or("-".into(), |v| format!("{v:.2}"))));
        rows.push(row);
    }
    align(&rows)
}

/// Fusion results annotated with their change against the best single-stream model.
pub fn render_table4(fused: &[&MetricsReport], singles: &[&MetricsReport]) -> String {
    let mut rows = vec![std::iter::once("Symptom".to_string())
        .chain(fused.iter().map(|r| r.label.clone()))
        .collect::<Vec<_>>()];
    for s in Symptom::ALL {
        let best = singles
            .iter()
            .filter_map(|r| r.mean[s.index()])
            .map(|f| f.macro_f)
            .max_by(f64::total_cmp);
        if fused.iter().all(|r| r.mean[s.index()].is_none()) {
            continue;
        }
        let mut row = vec![s.abbr().to_string()];
        row.extend(fused.iter().map(|r| match (r.mean[s.index()], best) {
            (Some(f), Some(b)) => format_delta(f.macro_f, b),
            (Some(f), None) => round(f.macro_f).to_string(),
            (None, _) => "-".into(),
        }));
        rows.push(row);
    }
    let best_rmse = singles.iter().filter_map(|r| r.mean_rmse).min_by(f64::total_cmp);
    if fused.iter().any(|r| r.mean_rmse.is_some()) {
        let mut row = vec!["MADRS(RMSE)".to_string()];
        row.extend(fused.iter().map(|r| match (r.mean_rmse, best_rmse) {
            (Some(v), Some(b)) => format_rmse_delta(v, b),
            (Some(v), None) => format!("{v:.2}"),
            (None, _) => "-".into(),
        }));
        rows.push(row);
    }
    align(&rows)
}

/// Per-fold and mean metrics as comma-separated rows.
pub fn report_csv(report: &MetricsReport) -> String {
    let mut out = String::from("fold,metric,f_absent,f_present,f_macro,rmse\n");
    let mut push = |fold: &str, scores: &[Option<FScores>; NUM_SYMPTOMS], r: Option<f64>| {
        for s in Symptom::ALL {
            if let Some(f) = scores[s.index()] {
                out.push_str(&format!(
                    "{fold},{},{:.4},{:.4},{:.4},\n",
                    s.abbr(),
                    f.absent,
                    f.present,
                    f.macro_f
                ));
            }
        }
        if let Some(v) = r {
            out.push_str(&format!("{fold},MADRS(RMSE),,,,{v:.4}\n"));
        }
    };
    for f in &report.folds {
        push(&f.fold.to_string(), &f.symptoms, f.rmse);
    }
    push("mean", &report.mean, report.mean_rmse);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BinaryLabels;
    use crate::eval::RecordingPrediction;

    fn report(label: &str, f: FScores, r: f64) -> MetricsReport {
        MetricsReport {
            label: label.into(),
            folds: Vec::new(),
            mean: [Some(f); NUM_SYMPTOMS],
            mean_rmse: Some(r),
        }
    }

    #[test]
    fn cells() {
        assert_eq!(format_cell(&FScores::new(74.0, 68.0)), "71 (74, 68)");
        assert_eq!(format_cell(&FScores::new(86.0, 0.0)), "43 (86, 0)");
        assert_eq!(format_delta(65.0, 62.0), "65 (3↑)");
        assert_eq!(format_delta(60.0, 62.0), "60 (2↓)");
        assert_eq!(format_delta(62.2, 61.9), "62");
        assert_eq!(format_rmse_delta(8.29, 8.76), "8.29 (0.47↓)");
    }

    #[test]
    fn tables() {
        let a = report("HuBERT", FScores::new(74.0, 68.0), 8.76);
        let t2 = render_table2(&[&a]);
        assert!(t2.contains("RSad"));
        assert!(t2.contains("71 (74, 68)"));
        assert!(t2.lines().last().unwrap().starts_with("MADRS(RMSE)"));
        assert_eq!(t2.lines().count(), 12);
        let fused = report("Fusion", FScores::new(70.0, 60.0), 8.29);
        let single = report("WavLM", FScores::new(64.0, 60.0), 9.1);
        let t4 = render_table4(&[&fused], &[&a, &single]);
        assert!(t4.contains("65 (6↓)"), "{t4}");
        assert!(t4.contains("8.29 (0.47↓)"), "{t4}");
    }

    #[test]
    fn fold_means() {
        let mk = |id: usize, fold: usize, d: bool, l: bool| RecordingPrediction {
            recording_id: format!("r{id}"),
            speaker_id: format!("s{id}"),
            fold,
            decisions: [Some(d); NUM_SYMPTOMS],
            severity: Some(10.0),
            labels: BinaryLabels { present: [l; NUM_SYMPTOMS] },
            madrs_total: 13,
        };
        let set = PredictionSet::new(vec![
            mk(0, 0, true, true),
            mk(1, 0, false, false),
            mk(2, 1, false, true),
            mk(3, 1, false, false),
        ])
        .unwrap();
        let r = score_predictions(&set, "m").unwrap();
        assert_eq!(r.folds.len(), 2);
        let f = r.mean[0].unwrap();
        assert!((f.present - 50.0).abs() < 1e-12);
        assert!((f.absent - (100.0 + 200.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((r.mean_rmse.unwrap() - 3.0).abs() < 1e-12);
        let csv = report_csv(&r);
        assert!(csv.contains("mean,ASad,"));
        assert!(csv.contains("mean,MADRS(RMSE),,,,3.0000"));
    }
}
