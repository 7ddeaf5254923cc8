use rayon::prelude::*;

use crate::dataset::{split_for_fold, FoldPlan};
use crate::error::{Error, Result};
use crate::eval::{aggregate_recordings, score_predictions, MetricsReport, PredictionSet, RecordingPrediction};
use crate::models::{build_model, predict_segments, train, Corpus, HeadMode, Model, ModelSpec, Task, TrainConfig, TrainLog};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossValOptions {
    /// Share of the non-test recordings held out (as whole speakers) for validation logs.
    pub val_fraction: f64,
    /// Worker threads for independent training runs; 1 runs everything in order.
    pub jobs: usize,
}

impl Default for CrossValOptions {
    fn default() -> Self {
        CrossValOptions {
            val_fraction: 0.1,
            jobs: 1,
        }
    }
}

/// One trained model.
#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub head_mode: HeadMode,
    pub model_seed: u64,
    pub train_seed: u64,
    pub log: TrainLog,
    pub model: Model,
}

#[derive(Debug, Clone)]
pub struct CrossValOutput {
    pub report: MetricsReport,
    pub predictions: PredictionSet,
    pub runs: Vec<FoldRun>,
}

/// Head modes trained per fold: one multi-task model, or one single-task model for
/// each symptom plus one for severity.
pub fn runs_per_fold(mode: HeadMode) -> Vec<HeadMode> {
    match mode {
        HeadMode::MultiTask => vec![HeadMode::MultiTask],
        HeadMode::SingleTask(_) => Task::all().into_iter().map(HeadMode::SingleTask).collect(),
    }
}

fn run_one(
    corpus: &Corpus,
    plan: &FoldPlan,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    opts: &CrossValOptions,
    fold: usize,
    head_mode: HeadMode,
) -> Result<(FoldRun, Vec<RecordingPrediction>)> {
    let split = split_for_fold(
        plan,
        &corpus.recordings,
        fold,
        opts.val_fraction,
        derive_seed(cfg.seed, &format!("fold{fold}/val")),
    )?;
    let train_set = corpus.training_set(&split.train_ids, cfg.severity_scale)?;
    let val_set = corpus.training_set(&split.val_ids, cfg.severity_scale)?;
    let test_set = corpus.training_set(&split.test_ids, cfg.severity_scale)?;

    let model_seed = derive_seed(cfg.seed, &format!("fold{fold}/model"));
    let train_seed = derive_seed(cfg.seed, &format!("fold{fold}/train"));
    let mut model = build_model(&spec.with_head_mode(head_mode), model_seed)?;
    let fold_cfg = TrainConfig {
        seed: train_seed,
        ..cfg.clone()
    };
    log::info!(
        "fold {fold} {head_mode}: {} train / {} val / {} test segments",
        train_set.len(),
        val_set.len(),
        test_set.len()
    );
    let log = train(&mut model, &train_set, Some(&val_set), &fold_cfg)?;
    let outputs = predict_segments(&model, &test_set.inputs)?;
    let preds = aggregate_recordings(&test_set.recordings, &test_set.recording_of, &outputs, cfg.severity_scale, fold)?;
    Ok((
        FoldRun {
            fold,
            head_mode,
            model_seed,
            train_seed,
            log,
            model,
        },
        preds,
    ))
}

/// k-fold cross-validation over the plan's folds: per fold, train on the remaining
/// speakers, predict the held-out recordings, and score. Results are identical for
/// any `jobs` value.
pub fn crossval(
    corpus: &Corpus,
    plan: &FoldPlan,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    opts: &CrossValOptions,
    label: &str,
) -> Result<CrossValOutput> {
    cfg.validate()?;
    spec.validate()?;
    let jobs: Vec<(usize, HeadMode)> = (0..plan.k)
        .flat_map(|f| runs_per_fold(spec.head_mode).into_iter().map(move |m| (f, m)))
        .collect();
    let work = |&(fold, mode): &(usize, HeadMode)| run_one(corpus, plan, spec, cfg, opts, fold, mode);
    let results: Vec<(FoldRun, Vec<RecordingPrediction>)> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(work).collect::<Result<Vec<_>>>())?
    } else {
        jobs.iter().map(work).collect::<Result<Vec<_>>>()?
    };

    let mut predictions: Option<PredictionSet> = None;
    let mut by_fold: Vec<Vec<RecordingPrediction>> = vec![Vec::new(); plan.k];
    let mut runs = Vec::with_capacity(results.len());
    for (run, preds) in results {
        let slot = &mut by_fold[run.fold];
        if slot.is_empty() {
            *slot = preds;
        } else {
            let mut merged = PredictionSet::new(std::mem::take(slot))?;
            merged.merge(&preds)?;
            *slot = merged.rows().to_vec();
        }
        runs.push(run);
    }
    for rows in by_fold {
        let mut all = predictions.take().map(|p| p.rows().to_vec()).unwrap_or_default();
        all.extend(rows);
        predictions = Some(PredictionSet::new(all)?);
    }
    let predictions = predictions.unwrap_or_default();
    let report = score_predictions(&predictions, label)?;
    Ok(CrossValOutput {
        report,
        predictions,
        runs,
    })
}
