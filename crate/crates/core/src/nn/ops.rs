//! Activations, dropout and losses.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed::rng_from;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn silu_scalar(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

pub fn silu(x: &Matrix) -> Matrix {
    x.map(silu_scalar)
}

/// Gradient through SiLU given the pre-activation input.
pub fn silu_backward(input: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    input.zip_map(upstream, |x, g| g * silu_derivative(x))
}

/// Row-wise softmax over exactly two logits.
pub fn softmax2(logits: &Matrix) -> Result<Matrix> {
    if logits.cols() != 2 {
        return Err(Error::shape(format!("softmax2 expects 2 columns, got {}", logits.cols())));
    }
    let mut out = Matrix::zeros(logits.rows(), 2);
    for r in 0..logits.rows() {
        let (a, b) = (logits.get(r, 0), logits.get(r, 1));
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        let s = ea + eb;
        out.set(r, 0, ea / s);
        out.set(r, 1, eb / s);
    }
    Ok(out)
}

fn check_targets(rows: usize, targets: &[usize]) -> Result<()> {
    if targets.len() != rows {
        return Err(Error::shape(format!("{} targets for {rows} rows", targets.len())));
    }
    if let Some(t) = targets.iter().find(|&&t| t > 1) {
        return Err(Error::invalid(format!("class target {t} not in {{0, 1}}")));
    }
    Ok(())
}

/// −mean log p[target] over rows of a probability matrix.
pub fn nll_loss(probs: &Matrix, targets: &[usize]) -> Result<f64> {
    check_targets(probs.rows(), targets)?;
    if probs.rows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(r, &t)| -probs.get(r, t).max(f64::MIN_POSITIVE).ln())
        .sum();
    Ok(total / probs.rows() as f64)
}

/// Softmax followed by NLL, computed from logits through log-sum-exp.
/// Returns (probabilities, loss, d loss / d logits) where the gradient is (p − onehot)/batch.
pub fn softmax_nll(logits: &Matrix, targets: &[usize]) -> Result<(Matrix, f64, Matrix)> {
    let probs = softmax2(logits)?;
    check_targets(logits.rows(), targets)?;
    let n = logits.rows();
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (r, &t) in targets.iter().enumerate() {
        let (a, b) = (logits.get(r, 0), logits.get(r, 1));
        let m = a.max(b);
        let lse = m + ((a - m).exp() + (b - m).exp()).ln();
        loss += lse - logits.get(r, t);
        grad.set(r, t, grad.get(r, t) - 1.0);
    }
    grad.scale(1.0 / n as f64);
    Ok((probs, loss / n as f64, grad))
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::shape(format!(
            "mse over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// d mse / d pred = 2 (pred − target) / n.
pub fn mse_backward(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    mse_loss(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect())
}

/// Inverted dropout output plus the multiplicative mask (None in inference mode).
#[derive(Debug, Clone)]
pub struct Dropout {
    pub output: Matrix,
    pub mask: Option<Matrix>,
}

impl Dropout {
    pub fn backward(&self, upstream: &Matrix) -> Result<Matrix> {
        match &self.mask {
            Some(mask) => upstream.zip_map(mask, |g, m| g * m),
            None => Ok(upstream.clone()),
        }
    }
}

/// Training mode zeroes each element with probability `rate` and scales survivors by
/// 1/(1 − rate); inference mode is the identity.
pub fn dropout(x: &Matrix, rate: f64, training: bool, seed: u64) -> Result<Dropout> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(Dropout {
            output: x.clone(),
            mask: None,
        });
    }
    let keep = 1.0 / (1.0 - rate);
    let mut rng = rng_from(seed);
    let data = (0..x.rows() * x.cols())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mask = Matrix::from_vec(x.rows(), x.cols(), data)?;
    Ok(Dropout {
        output: x.zip_map(&mask, |a, m| a * m)?,
        mask: Some(mask),
    })
}
