use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Recording, Symptom};
use crate::error::{Error, Result};
use crate::eval::{aggregate_recordings, f_scores, rmse};
use crate::models::{multitask_loss, Model, ModelKind, SegmentInput, SegmentOutput, SegmentTarget};
use crate::nn::OptimizerConfig;
use crate::seed::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Divisor that maps the MADRS total onto the regression target.
    pub severity_scale: f64,
    /// Weight λ on the severity MSE in multi-task training.
    pub regression_weight: f64,
    /// Classification heads that receive loss; all of the model's heads when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symptom_mask: Option<Vec<Symptom>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            severity_scale: 60.0,
            regression_weight: 1.0,
            symptom_mask: None,
        }
    }
}

impl TrainConfig {
    /// Defaults with the Adam beta2 used for the given model family.
    pub fn for_kind(kind: ModelKind) -> Self {
        let mut cfg = TrainConfig::default();
        if kind != ModelKind::CnnBaseline {
            cfg.optimizer.beta2 = 0.999;
        }
        cfg
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.severity_scale > 0.0) {
            return Err(Error::Config(format!(
                "severity scale must be positive, got {}",
                self.severity_scale
            )));
        }
        if !(self.regression_weight >= 0.0) {
            return Err(Error::Config("regression weight must be >= 0".into()));
        }
        self.optimizer.validate()
    }
}

/// Segments with their inherited labels and the recording each came from.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet<'a> {
    pub inputs: Vec<&'a SegmentInput>,
    pub targets: Vec<SegmentTarget>,
    /// Index into `recordings` for every segment.
    pub recording_of: Vec<usize>,
    pub recordings: Vec<&'a Recording>,
}

impl TrainingSet<'_> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub train_loss: f64,
    /// Recording-level macro F-score averaged over the model's heads, in percent.
    pub val_macro_f: Option<f64>,
    pub val_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub batch_losses: Vec<f64>,
}

const PREDICT_BATCH: usize = 64;

/// Frozen-parameter predictions for every segment.
pub fn predict_segments(model: &Model, inputs: &[&SegmentInput]) -> Result<Vec<SegmentOutput>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(PREDICT_BATCH) {
        out.extend(model.infer(chunk)?.segments());
    }
    Ok(out)
}

fn validation_metrics(model: &Model, val: &TrainingSet, severity_scale: f64) -> Result<(Option<f64>, Option<f64>)> {
    let outputs = predict_segments(model, &val.inputs)?;
    let preds = aggregate_recordings(&val.recordings, &val.recording_of, &outputs, severity_scale, 0)?;
    let heads: Vec<Symptom> = model.heads().collect();
    let macro_f = if heads.is_empty() {
        None
    } else {
        let mut sum = 0.0;
        for s in &heads {
            let decisions: Vec<bool> = preds.iter().map(|p| p.decisions[s.index()].unwrap_or(false)).collect();
            let labels: Vec<bool> = preds.iter().map(|p| p.labels.get(*s)).collect();
            sum += f_scores(&decisions, &labels)?.macro_f;
        }
        Some(sum / heads.len() as f64)
    };
    let val_rmse = if model.spec().has_severity_head() {
        let est: Vec<f64> = preds.iter().map(|p| p.severity.unwrap_or(0.0)).collect();
        let truth: Vec<f64> = preds.iter().map(|p| f64::from(p.madrs_total)).collect();
        Some(rmse(&est, &truth)?)
    } else {
        None
    };
    Ok((macro_f, val_rmse))
}

/// Trains for the configured number of epochs with a seeded shuffle per epoch and
/// an Adam step after every batch. Returns the per-epoch log; the model keeps the
/// parameters from the final epoch.
pub fn train(model: &mut Model, data: &TrainingSet, val: Option<&TrainingSet>, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    model.reseed_dropout(crate::seed::derive_seed(cfg.seed, "dropout"));
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut rng = derived_rng(cfg.seed, &format!("shuffle/{epoch}"));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<&SegmentInput> = batch.iter().map(|&i| data.inputs[i]).collect();
            let targets: Vec<SegmentTarget> = batch.iter().map(|&i| data.targets[i]).collect();
            model.zero_grad();
            let out = model.forward(&inputs, true)?;
            let (loss, grads) = multitask_loss(&out, &targets, cfg.regression_weight, cfg.symptom_mask.as_deref())?;
            model.backward(&grads)?;
            model.step(&cfg.optimizer)?;
            if !loss.total.is_finite() {
                return Err(Error::invalid(format!("loss diverged in epoch {epoch}")));
            }
            log.batch_losses.push(loss.total);
            epoch_loss += loss.total;
            batches += 1;
        }
        let (val_macro_f, val_rmse) = match val {
            Some(v) if !v.is_empty() => validation_metrics(model, v, cfg.severity_scale)?,
            _ => (None, None),
        };
        log::debug!("epoch {epoch}: loss {:.5}", epoch_loss / batches as f64);
        log.epochs.push(EpochLog {
            epoch,
            train_loss: epoch_loss / batches as f64,
            val_macro_f,
            val_rmse,
        });
    }
    Ok(log)
}
