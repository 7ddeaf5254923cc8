//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use depsym::dataset::{make_folds, split_for_fold, BinaryLabels, Recording, Symptom, NUM_SYMPTOMS};
use depsym::eval::{
    bootstrap_compare, compare_all, crossval, f_scores, format_cell, format_delta, majority_vote, render_table2,
    render_table4, report_csv, score_predictions, write_predictions, CrossValOptions, CrossValOutput, FScores, Metric,
    PredictionSet, RecordingPrediction, DEFAULT_LEVEL, DEFAULT_RESAMPLES,
};
use depsym::models::{
    build_model, train, HeadMode, Model, ModelKind, ModelSpec, SegmentInput, SegmentTarget, StreamSpec, Task,
    TrainConfig,
};
use depsym::nn::{grad_check, write_checkpoint, Matrix};
use depsym::seed::rng_from;
use depsym::synth::{generate, SynthConfig, SynthDataset, SynthStream};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget_s: u64) -> Result<(), String> {
    if elapsed <= Duration::from_secs(budget_s) {
        Ok(())
    } else {
        Err(format!("took {:.1}s, budget {budget_s}s", elapsed.as_secs_f64()))
    }
}

fn synth(n_speakers: usize, seconds: f64, streams: &[(&str, usize)], signal: f64, priors: Option<[f64; 10]>, seed: u64) -> SynthDataset {
    generate(&synth_config(n_speakers, seconds, streams, signal, priors, seed)).expect("synthetic dataset")
}

fn synth_config(n_speakers: usize, seconds: f64, streams: &[(&str, usize)], signal: f64, priors: Option<[f64; 10]>, seed: u64) -> SynthConfig {
    let mut cfg = SynthConfig {
        n_speakers,
        seconds_per_recording: seconds,
        streams: streams
            .iter()
            .map(|(n, d)| SynthStream {
                name: n.to_string(),
                dim: *d,
            })
            .collect(),
        signal_strength: signal,
        noise_scale: 1.0,
        seed,
        ..SynthConfig::default()
    };
    if let Some(p) = priors {
        cfg.symptom_priors = p;
    }
    cfg
}

fn run_crossval(data: &SynthDataset, spec: &ModelSpec, seed: u64, jobs: usize, label: &str) -> CrossValOutput {
    let corpus = data.corpus(spec).expect("corpus");
    let plan = make_folds(&corpus.recordings, 5, seed).expect("folds");
    let cfg = TrainConfig::for_kind(spec.kind).with_seed(seed);
    let opts = CrossValOptions {
        jobs,
        ..CrossValOptions::default()
    };
    crossval(&corpus, &plan, spec, &cfg, &opts, label).expect("crossval")
}

/// Brute-force oracle: explicit confusion matrix, precision and recall per class.
fn oracle_f(decisions: &[bool], labels: &[bool], class: bool) -> f64 {
    let mut m = [[0usize; 2]; 2];
    for (&d, &l) in decisions.iter().zip(labels) {
        m[usize::from(l)][usize::from(d)] += 1;
    }
    let c = usize::from(class);
    let tp = m[c][c] as f64;
    let predicted = (m[0][c] + m[1][c]) as f64;
    let actual = (m[c][0] + m[c][1]) as f64;
    if predicted == 0.0 || actual == 0.0 {
        return 0.0;
    }
    let (p, r) = (tp / predicted, tp / actual);
    if p + r == 0.0 {
        0.0
    } else {
        100.0 * 2.0 * p * r / (p + r)
    }
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from(20);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let decisions: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let f = f_scores(&decisions, &labels).map_err(|e| e.to_string())?;
        let fa = oracle_f(&decisions, &labels, false);
        let fp = oracle_f(&decisions, &labels, true);
        worst = worst
            .max((f.absent - fa).abs())
            .max((f.present - fp).abs())
            .max((f.macro_f - (fa + fp) / 2.0).abs());
    }
    within(start.elapsed(), 5)?;
    check(worst <= 1e-9, format!("max |diff| {worst:.2e} over 1000 instances"))
}

fn a_priori_pattern() -> Outcome {
    let data = synth(300, 10.0, &[("ssl", 8)], 0.0, None, 31);
    let plan = make_folds(&data.recordings, 5, 31).map_err(|e| e.to_string())?;
    let rows: Vec<RecordingPrediction> = data
        .recordings
        .iter()
        .map(|r| RecordingPrediction {
            recording_id: r.recording_id.clone(),
            speaker_id: r.speaker_id.clone(),
            fold: plan.fold_of(&r.speaker_id).unwrap(),
            decisions: [Some(false); NUM_SYMPTOMS],
            severity: None,
            labels: r.labels(),
            madrs_total: r.madrs_total,
        })
        .collect();
    let report = score_predictions(&PredictionSet::new(rows).unwrap(), "a-priori").map_err(|e| e.to_string())?;
    for s in Symptom::ALL {
        for fold in &report.folds {
            let f = fold.symptoms[s.index()].unwrap();
            let n = fold.recordings as f64;
            let present = data
                .recordings
                .iter()
                .filter(|r| plan.fold_of(&r.speaker_id) == Some(fold.fold) && r.labels().get(s))
                .count() as f64;
            // all-absent: TN = absent count, FN = present count
            let expected_fa = 100.0 * 2.0 * (n - present) / (2.0 * (n - present) + present);
            if f.present != 0.0 || f.macro_f != f.absent / 2.0 || f.absent != expected_fa {
                return Err(format!("{s} fold {}: {f:?}, expected F_A {expected_fa}", fold.fold));
            }
        }
        let m = report.mean[s.index()].unwrap();
        if m.present != 0.0 || m.macro_f != m.absent / 2.0 {
            return Err(format!("{s} mean {m:?}"));
        }
    }
    let cell = format_cell(&FScores::new(86.0, 0.0));
    let table = render_table2(&[&report]);
    let pattern_ok = table.lines().skip(1).all(|l| l.trim_end().ends_with(", 0)"));
    check(
        cell == "43 (86, 0)" && pattern_ok,
        format!("F_P=0, F_M=F_A/2 exactly on 10 symptoms x 5 folds; cell {cell}"),
    )
}

fn pooled_batch(dims: &[usize], n: usize, seed: u64) -> Vec<SegmentInput> {
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| {
            SegmentInput::Pooled(
                dims.iter()
                    .map(|&d| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
            )
        })
        .collect()
}

fn toy_targets(n: usize, seed: u64) -> Vec<SegmentTarget> {
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| {
            let mut present = [false; NUM_SYMPTOMS];
            present.iter_mut().for_each(|p| *p = rng.random_bool(0.5));
            SegmentTarget {
                labels: BinaryLabels { present },
                severity: Some(rng.random_range(0.0..1.0)),
            }
        })
        .collect()
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let cases: Vec<(ModelSpec, Vec<SegmentInput>)> = vec![
        (ModelSpec::single_stream("a", 6, HeadMode::MultiTask), pooled_batch(&[6], 3, 1)),
        (
            ModelSpec::fusion(&[("a", 5), ("b", 3), ("c", 4)], HeadMode::MultiTask),
            pooled_batch(&[5, 3, 4], 2, 2),
        ),
        (ModelSpec::new(ModelKind::CnnBaseline, vec![StreamSpec::new("spectro", 3)], HeadMode::MultiTask), {
            let mut rng = rng_from(3);
            (0..1)
                .map(|_| SegmentInput::Sequence(Matrix::from_vec(3, 8, (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()))
                .collect()
        }),
    ];
    let mut ok = true;
    for (spec, inputs) in cases {
        let mut model = build_model(&spec, 17).map_err(|e| e.to_string())?;
        let refs: Vec<&SegmentInput> = inputs.iter().collect();
        let targets = toy_targets(refs.len(), 4);
        let report = grad_check(
            &mut model,
            |m: &mut Model, bw| Ok(m.loss_and_grads(&refs, &targets, 1.0, bw)?.total),
            1e-5,
        )
        .map_err(|e| e.to_string())?;
        ok &= report.passed();
        details.push(format!("{:?} {:.1e} over {}", spec.kind, report.max_relative_error, report.checked));
    }
    within(start.elapsed(), 60)?;
    check(ok, details.join("; "))
}

fn learnability() -> Outcome {
    let start = Instant::now();
    // No recording offset: with one shared offset per recording the severity head
    // memorises the training totals instead of the planted pattern.
    let cfg = SynthConfig {
        speaker_scale: Some(0.0),
        ..synth_config(200, 300.0, &[("ssl", 64)], 3.0, None, 41)
    };
    let data = generate(&cfg).expect("synthetic dataset");
    let spec = ModelSpec::single_stream("ssl", 64, HeadMode::MultiTask);
    let out = run_crossval(&data, &spec, 41, 1, "synthetic");
    within(start.elapsed(), 300)?;
    let (worst, sym) = Symptom::ALL
        .iter()
        .map(|s| (out.report.mean[s.index()].unwrap().macro_f, *s))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let rmse = out.report.mean_rmse.unwrap();
    check(
        worst >= 90.0 && rmse <= 5.0,
        format!(
            "min symptom F_M {worst:.1} ({sym}), RMSE {rmse:.2}, {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn null_signal() -> Outcome {
    let start = Instant::now();
    let data = synth(1000, 60.0, &[("ssl", 64)], 0.0, Some([0.5; NUM_SYMPTOMS]), 51);
    let spec = ModelSpec::single_stream("ssl", 64, HeadMode::MultiTask);
    let a = run_crossval(&data, &spec, 52, 1, "null-a");
    let b = run_crossval(&data, &spec, 53, 1, "null-b");
    let results = compare_all(&a.predictions, &b.predictions, DEFAULT_RESAMPLES, DEFAULT_LEVEL, 54).map_err(|e| e.to_string())?;
    within(start.elapsed(), 300)?;
    let fm: Vec<f64> = Symptom::ALL.iter().map(|s| a.report.mean[s.index()].unwrap().macro_f).collect();
    let out_of_band: Vec<String> = Symptom::ALL
        .iter()
        .zip(&fm)
        .filter(|(_, f)| (**f - 50.0).abs() > 5.0)
        .map(|(s, f)| format!("{s}={f:.1}"))
        .collect();
    let significant: Vec<String> = results.iter().filter(|r| r.significant()).map(|r| r.metric.clone()).collect();
    let lo = fm.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    check(
        out_of_band.is_empty() && significant.is_empty(),
        format!(
            "F_M range [{lo:.1}, {hi:.1}], out of band {out_of_band:?}, significant {significant:?} of {} comparisons",
            results.len()
        ),
    )
}

fn serialize(out: &CrossValOutput) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_predictions(&mut bytes, &out.predictions).unwrap();
    bytes.extend(report_csv(&out.report).into_bytes());
    for run in &out.runs {
        write_checkpoint(&mut bytes, &run.model.to_checkpoint(&TrainConfig::default().optimizer)).unwrap();
    }
    bytes
}

fn protocol_invariants() -> Outcome {
    let data = synth(60, 30.0, &[("ssl", 16)], 1.0, None, 61);
    let plan = make_folds(&data.recordings, 5, 61).map_err(|e| e.to_string())?;
    let folds: Vec<BTreeSet<&str>> = (0..5).map(|f| plan.speakers_in(f).into_iter().collect()).collect();
    for i in 0..5 {
        for j in i + 1..5 {
            if !folds[i].is_disjoint(&folds[j]) {
                return Err(format!("folds {i} and {j} share speakers"));
            }
        }
        let split = split_for_fold(&plan, &data.recordings, i, 0.1, 1).map_err(|e| e.to_string())?;
        let spk = |ids: &[String]| -> BTreeSet<String> {
            ids.iter()
                .map(|id| data.recordings.iter().find(|r| &r.recording_id == id).unwrap().speaker_id.clone())
                .collect()
        };
        let (tr, va, te) = (spk(&split.train_ids), spk(&split.val_ids), spk(&split.test_ids));
        if !tr.is_disjoint(&te) || !tr.is_disjoint(&va) || !va.is_disjoint(&te) {
            return Err(format!("fold {i}: split shares speakers"));
        }
    }

    let mut rng = rng_from(62);
    for _ in 0..500 {
        let n = rng.random_range(1..40);
        let mut votes: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let before = majority_vote(&votes).unwrap();
        votes.shuffle(&mut rng);
        if majority_vote(&votes).unwrap() != before {
            return Err("majority vote changed under permutation".into());
        }
    }

    let spec = ModelSpec::single_stream("ssl", 16, HeadMode::MultiTask);
    let first = serialize(&run_crossval(&data, &spec, 63, 1, "a"));
    let second = serialize(&run_crossval(&data, &spec, 63, 1, "a"));
    let parallel = serialize(&run_crossval(&data, &spec, 63, 3, "a"));
    check(
        first == second && first == parallel,
        format!("5 disjoint folds; 500 vote permutations; {} identical bytes across 3 runs", first.len()),
    )
}

fn single_multi_consistency() -> Outcome {
    let data = synth(30, 60.0, &[("ssl", 16)], 3.0, None, 71);
    let symptom = Symptom::ReducedSleep;
    let single = ModelSpec::single_stream("ssl", 16, HeadMode::SingleTask(Task::Symptom(symptom)));
    let multi = single.with_head_mode(HeadMode::MultiTask);
    let corpus = data.corpus(&single).map_err(|e| e.to_string())?;
    let ids: Vec<String> = corpus.recordings.iter().map(|r| r.recording_id.clone()).collect();
    let set = corpus.training_set(&ids, 60.0).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::for_kind(single.kind).with_seed(72);

    let mut a = build_model(&single, 73).map_err(|e| e.to_string())?;
    let la = train(&mut a, &set, None, &cfg).map_err(|e| e.to_string())?;
    let restricted = TrainConfig {
        regression_weight: 0.0,
        symptom_mask: Some(vec![symptom]),
        ..cfg
    };
    let mut b = build_model(&multi, 73).map_err(|e| e.to_string())?;
    let lb = train(&mut b, &set, None, &restricted).map_err(|e| e.to_string())?;
    let head = format!("head.{}", symptom.abbr());
    let same_params = a.layer(&head) == b.layer(&head) && a.layer("trunk.dense") == b.layer("trunk.dense");
    check(
        la.batch_losses == lb.batch_losses && same_params,
        format!("{} batch losses bit-identical, head and trunk parameters equal", la.batch_losses.len()),
    )
}

fn fusion_plumbing() -> Outcome {
    let start = Instant::now();
    let streams = [("hubert", 768), ("rdino", 512), ("byol", 2048)];
    let data = synth(25, 30.0, &streams, 3.0, None, 81);
    let fused = run_crossval(&data, &ModelSpec::fusion(&streams, HeadMode::MultiTask), 82, 1, "fusion");
    let singles: Vec<CrossValOutput> = streams
        .iter()
        .map(|(n, d)| run_crossval(&data, &ModelSpec::single_stream(n, *d, HeadMode::MultiTask), 82, 1, n))
        .collect();
    let single_refs: Vec<_> = singles.iter().map(|o| &o.report).collect();
    let table = render_table4(&[&fused.report], &single_refs);
    let trained = fused.runs.len() == 5
        && fused
            .runs
            .iter()
            .all(|r| r.log.epochs.len() == 5 && r.log.epochs[4].train_loss < r.log.epochs[0].train_loss);
    let cells_ok = table.lines().skip(1).all(|l| {
        let cell = l.split_whitespace().skip(1).collect::<Vec<_>>().join(" ");
        cell.chars().next().is_some_and(|c| c.is_ascii_digit())
            && (!cell.contains('(') || cell.ends_with("↑)") || cell.ends_with("↓)"))
    });
    let example = format_delta(65.0, 62.0);
    println!("{table}");
    check(
        trained && cells_ok && example == "65 (3↑)" && table.lines().count() == 12,
        format!(
            "3-stream fusion trained on 5 folds, table4 rendered, example cell {example}, {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn bootstrap_correctness() -> Outcome {
    let data = synth(200, 1.0, &[("ssl", 4)], 0.0, Some([0.5; NUM_SYMPTOMS]), 91);
    let make = |decide: &dyn Fn(&Recording) -> bool| {
        PredictionSet::new(
            data.recordings
                .iter()
                .map(|r| RecordingPrediction {
                    recording_id: r.recording_id.clone(),
                    speaker_id: r.speaker_id.clone(),
                    fold: 0,
                    decisions: [Some(decide(r)); NUM_SYMPTOMS],
                    severity: None,
                    labels: r.labels(),
                    madrs_total: r.madrs_total,
                })
                .collect(),
        )
        .unwrap()
    };
    let s = Symptom::ApparentSadness;
    let perfect = make(&|r| r.labels().get(s));
    let constant = make(&|_| false);
    let metric = Metric::MacroF(s);
    let same = bootstrap_compare(&perfect, &perfect.clone(), metric, DEFAULT_RESAMPLES, DEFAULT_LEVEL, 92).map_err(|e| e.to_string())?;
    let diff = bootstrap_compare(&perfect, &constant, metric, DEFAULT_RESAMPLES, DEFAULT_LEVEL, 92).map_err(|e| e.to_string())?;
    let again = bootstrap_compare(&perfect, &constant, metric, DEFAULT_RESAMPLES, DEFAULT_LEVEL, 92).map_err(|e| e.to_string())?;
    check(
        same.ci_low == 0.0 && same.ci_high == 0.0 && diff.ci_low > 0.0 && diff == again,
        format!(
            "identical [{}, {}]; perfect vs constant [{:.1}, {:.1}]; repeat identical",
            same.ci_low, same.ci_high, diff.ci_low, diff.ci_high
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric oracle equivalence", metric_oracle),
        ("a-priori pattern reproduction", a_priori_pattern),
        ("gradient correctness", gradient_correctness),
        ("learnability", learnability),
        ("null-signal sanity", null_signal),
        ("protocol invariants", protocol_invariants),
        ("single-task/multi-task consistency", single_multi_consistency),
        ("fusion plumbing", fusion_plumbing),
        ("bootstrap correctness", bootstrap_correctness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
