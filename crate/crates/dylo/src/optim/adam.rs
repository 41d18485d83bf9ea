//! Adaptive-moment gradient descent with decoupled weight decay.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Hyper-parameters for [`Adam`]. The decay multiplies the weights
/// directly (scaled by the learning rate) before the moment update, so it
/// never passes through the moment estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First/second-moment optimizer state for a fixed, ordered parameter
/// list. The list handed to every [`Adam::step`] call must match the one
/// used at construction (same names, same order, same lengths).
pub struct Adam<T: Scalar> {
    config: AdamConfig,
    t: u64,
    names: Vec<String>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, params: &[(String, Tensor<T>)]) -> Self {
        Adam {
            config,
            t: 0,
            names: params.iter().map(|(n, _)| n.clone()).collect(),
            m: params.iter().map(|(_, p)| vec![T::zero(); p.numel()]).collect(),
            v: params.iter().map(|(_, p)| vec![T::zero(); p.numel()]).collect(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Apply one update from the gradients currently stored on `params`.
    /// Gradients are left untouched; callers zero them between steps.
    pub fn step(&mut self, params: &[(String, Tensor<T>)]) -> Result<()> {
        if params.len() != self.names.len() {
            return Err(Error::Train(format!(
                "optimizer tracks {} parameters but step received {}",
                self.names.len(),
                params.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.config.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.config.beta2.powi(self.t as i32);
        let alpha = T::from_f64(self.config.learning_rate);
        let beta1 = T::from_f64(self.config.beta1);
        let beta2 = T::from_f64(self.config.beta2);
        let one_minus_b1 = T::from_f64(1.0 - self.config.beta1);
        let one_minus_b2 = T::from_f64(1.0 - self.config.beta2);
        let eps = T::from_f64(self.config.epsilon);
        let decay = T::from_f64(self.config.weight_decay);
        let bc1 = T::from_f64(bc1);
        let bc2 = T::from_f64(bc2);
        let apply_decay = self.config.weight_decay != 0.0;

        for (slot, (name, p)) in params.iter().enumerate() {
            if name != &self.names[slot] {
                return Err(Error::Train(format!(
                    "parameter order changed: slot {slot} was {} but step saw {name}",
                    self.names[slot]
                )));
            }
            let grad = p.grad().ok_or_else(|| {
                Error::Train(format!("parameter {name} has no gradient"))
            })?;
            if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
                return Err(Error::Train(format!(
                    "non-finite gradient {bad} in parameter {name}"
                )));
            }
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            if grad.len() != m.len() {
                return Err(Error::Train(format!(
                    "parameter {name} changed size: optimizer has {} slots, gradient has {}",
                    m.len(),
                    grad.len()
                )));
            }
            let mut inner = p.borrow_mut();
            for i in 0..grad.len() {
                if apply_decay {
                    let shrink = alpha * decay * inner.data[i];
                    inner.data[i] -= shrink;
                }
                m[i] = beta1 * m[i] + one_minus_b1 * grad[i];
                v[i] = beta2 * v[i] + one_minus_b2 * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                inner.data[i] -= alpha * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
