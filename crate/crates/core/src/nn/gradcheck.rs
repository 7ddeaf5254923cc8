//! Finite-difference verification of analytic gradients.

use crate::error::Result;
use crate::nn::LayerParams;

/// (f(+h) − f(−h)) / 2h.
pub fn central_difference(h: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Anything exposing its trainable layers in a fixed order.
pub trait Parameterized {
    fn layer_names(&self) -> Vec<String>;
    fn layer_mut(&mut self, index: usize) -> &mut LayerParams;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Layer name and flat parameter index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

/// Denominator floor for the relative error; keeps round-off on near-zero gradients
/// from registering as failures.
pub const RELATIVE_FLOOR: f64 = 1e-3;
pub const STEP: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares analytic gradients with central differences over every parameter.
///
/// `eval(model, true)` must zero gradients, run forward and backward, and return the loss;
/// `eval(model, false)` only returns the loss. Both must be deterministic.
pub fn grad_check<M: Parameterized>(
    model: &mut M,
    mut eval: impl FnMut(&mut M, bool) -> Result<f64>,
    tolerance: f64,
) -> Result<GradCheckReport> {
    eval(model, true)?;
    let names = model.layer_names();
    let analytic: Vec<Vec<f64>> = (0..names.len())
        .map(|l| {
            let p = model.layer_mut(l);
            (0..p.num_params()).map(|i| p.grad(i)).collect()
        })
        .collect();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
        tolerance,
    };
    for (layer, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let original = model.layer_mut(layer).param(i);
            model.layer_mut(layer).set_param(i, original + STEP);
            let plus = eval(model, false)?;
            model.layer_mut(layer).set_param(i, original - STEP);
            let minus = eval(model, false)?;
            model.layer_mut(layer).set_param(i, original);
            let err = relative_error(a, (plus - minus) / (2.0 * STEP));
            report.checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((names[layer].clone(), i));
            }
        }
    }
    Ok(report)
}
