use crate::error::{HerbError, Result};
use crate::tensor::{Matrix, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled (AdamW-style) decay applied directly to the weights.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// Moment buffers for every tensor in a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros = |_| -> Vec<Matrix> {
            params
                .iter()
                .map(|(_, _, t)| Matrix::zeros(t.value.rows(), t.value.cols()))
                .collect()
        };
        AdamState {
            config,
            first: zeros(()),
            second: zeros(()),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update of every trainable tensor; gradients are cleared afterwards.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(HerbError::precondition(format!(
                "optimizer tracks {} tensors, parameter set has {}",
                self.first.len(),
                params.len()
            )));
        }
        for (id, name, t) in params.iter() {
            if t.requires_grad && t.grad.is_none() {
                return Err(HerbError::precondition(format!(
                    "parameter '{name}' (#{}) has no gradient",
                    id.index()
                )));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (k, t) in params.tensors_mut().iter_mut().enumerate() {
            if !t.requires_grad {
                continue;
            }
            let grad = t.grad.take().expect("checked above");
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            let w = t.value.data_mut();
            for i in 0..w.len() {
                let g = grad.data()[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                if weight_decay != 0.0 {
                    w[i] -= lr * weight_decay * w[i];
                }
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
