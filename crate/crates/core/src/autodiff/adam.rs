use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay; 0 disables it.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = |p: &ParamStore| {
            p.iter()
                .map(|(_, t)| Tensor::zeros(t.rows(), t.cols()))
                .collect::<Vec<_>>()
        };
        AdamState {
            config,
            t: 0,
            m: zeros(params),
            v: zeros(params),
        }
    }

    /// One bias-corrected update at learning rate `lr` (the configured rate
    /// scaled by any schedule).
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor], lr: f64) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::dim("adam_step", "one gradient per parameter"));
        }
        for (name, g) in params.names().iter().zip(grads) {
            if let Some((i, v)) = g.first_non_finite() {
                return Err(Error::Training(format!(
                    "non-finite gradient {v} at index {i} of parameter `{name}`"
                )));
            }
        }
        self.t += 1;
        let AdamConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
            ..
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (i, g) in grads.iter().enumerate() {
            let p = params.by_index_mut(i);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                if weight_decay > 0.0 {
                    *w -= lr * weight_decay * *w;
                }
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Linear warmup from 0 over `warmup_epochs`, then constant.
pub fn warmup_factor(epoch: usize, warmup_epochs: usize) -> f64 {
    if warmup_epochs == 0 {
        1.0
    } else {
        ((epoch + 1) as f64 / warmup_epochs as f64).min(1.0)
    }
}
