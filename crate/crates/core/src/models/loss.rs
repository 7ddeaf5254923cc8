use crate::dataset::Symptom;
use crate::error::{Error, Result};
use crate::models::{ForwardOutput, SegmentTarget};
use crate::nn::ops::{mse_backward, mse_loss, softmax_nll};
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub per_head: Vec<(Symptom, f64)>,
    pub severity_mse: Option<f64>,
}

/// Gradients of the loss w.r.t. head outputs. Only heads listed here are trained.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputGrads {
    pub logits: Vec<(Symptom, Matrix)>,
    pub severity: Option<Vec<f64>>,
}

/// mean NLL over the active classification heads + weight · MSE(severity).
///
/// `active` restricts the classification heads that contribute (default: all the
/// model has). A model with no classification heads (single-task severity) uses
/// weight 1 on the MSE. With `regression_weight == 0` the severity term and its
/// gradient are dropped entirely.
pub fn multitask_loss(
    outputs: &ForwardOutput,
    targets: &[SegmentTarget],
    regression_weight: f64,
    active: Option<&[Symptom]>,
) -> Result<(LossBreakdown, OutputGrads)> {
    if targets.len() != outputs.batch_size() {
        return Err(Error::shape(format!(
            "{} targets for a batch of {}",
            targets.len(),
            outputs.batch_size()
        )));
    }
    let mut per_head = Vec::new();
    let mut grads = OutputGrads::default();
    for (s, logits) in &outputs.logits {
        if active.is_some_and(|a| !a.contains(s)) {
            continue;
        }
        let t: Vec<usize> = targets.iter().map(|t| usize::from(t.labels.get(*s))).collect();
        let (_, loss, g) = softmax_nll(logits, &t)?;
        per_head.push((*s, loss));
        grads.logits.push((*s, g));
    }
    let n_heads = per_head.len();
    if n_heads > 0 {
        for (_, g) in &mut grads.logits {
            g.scale(1.0 / n_heads as f64);
        }
    }
    let mut total = per_head.iter().map(|(_, l)| l).sum::<f64>() / n_heads.max(1) as f64;

    let weight = if outputs.logits.is_empty() { 1.0 } else { regression_weight };
    let mut severity_mse = None;
    if let Some(pred) = &outputs.severity {
        if weight != 0.0 {
            let target = targets
                .iter()
                .map(|t| t.severity.ok_or_else(|| Error::invalid("missing severity label")))
                .collect::<Result<Vec<f64>>>()?;
            let mse = mse_loss(pred, &target)?;
            total += weight * mse;
            severity_mse = Some(mse);
            grads.severity = Some(mse_backward(pred, &target)?.into_iter().map(|g| g * weight).collect());
        }
    }
    Ok((
        LossBreakdown {
            total,
            per_head,
            severity_mse,
        },
        grads,
    ))
}
