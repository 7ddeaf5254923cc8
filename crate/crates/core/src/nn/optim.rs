use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LayerParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// L2 penalty folded into the gradient before the moment updates.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.beta1) || !open_unit(self.beta2) {
            return Err(Error::Config(format!(
                "betas must lie in (0, 1): beta1={} beta2={}",
                self.beta1, self.beta2
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::Config("weight decay must be >= 0 and epsilon > 0".into()));
        }
        Ok(())
    }
}

fn adam_update(
    values: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &OptimizerConfig,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..values.len() {
        let g = grads[i] + cfg.weight_decay * values[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        values[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

impl LayerParams {
    /// One bias-corrected Adam update. Fails if no gradient has been accumulated since
    /// the previous step.
    pub fn adam_step(&mut self, cfg: &OptimizerConfig) -> Result<()> {
        if !self.grads_fresh {
            return Err(Error::StaleGradients);
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);
        adam_update(
            self.weights.as_mut_slice(),
            self.grad_weights.as_slice(),
            &mut self.m_weights,
            &mut self.v_weights,
            cfg,
            bias1,
            bias2,
        );
        adam_update(
            &mut self.bias,
            &self.grad_bias,
            &mut self.m_bias,
            &mut self.v_bias,
            cfg,
            bias1,
            bias2,
        );
        self.grads_fresh = false;
        Ok(())
    }
}
