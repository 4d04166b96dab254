//! Adam with bias correction, plus the two weight-regularization modes used
//! by the training protocol: L2 decay folded into the gradient, or a
//! post-step max-norm projection of weight-matrix rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{GradSlot, SlotMut};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Regularizer {
    /// Gradient term c·θ on weight matrices.
    Decay(f64),
    /// Rows of weight matrices are rescaled to at most this L2 norm after
    /// each step.
    MaxNorm(f64),
}

impl Regularizer {
    pub fn decay_coefficient(&self) -> f64 {
        match self {
            Regularizer::Decay(c) => *c,
            Regularizer::MaxNorm(_) => 0.0,
        }
    }

    /// Post-step projection; a no-op in decay mode.
    pub fn project(&self, slots: &mut [SlotMut<'_>]) {
        if let Regularizer::MaxNorm(cap) = self {
            for slot in slots.iter_mut() {
                if !slot.weight_matrix || !slot.trainable {
                    continue;
                }
                for r in 0..slot.rows {
                    let row = &mut slot.values[r * slot.cols..(r + 1) * slot.cols];
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > *cap {
                        let scale = cap / norm;
                        for v in row.iter_mut() {
                            *v *= scale;
                        }
                    }
                }
            }
        }
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over position-aligned parameter and gradient slots.
    /// `decay` is added to the gradient of weight-matrix slots before the
    /// moment updates.
    pub fn step(
        &mut self,
        params: &mut [SlotMut<'_>],
        grads: &[GradSlot<'_>],
        lr: f64,
        decay: f64,
    ) -> Result<()> {
        if lr <= 0.0 || !lr.is_finite() {
            return Err(Error::config(format!("learning rate must be positive, got {lr}")));
        }
        if params.len() != grads.len() {
            return Err(Error::contract(format!(
                "adam: {} parameter slots but {} gradient slots",
                params.len(),
                grads.len()
            )));
        }
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| Moments {
                    m: vec![0.0; p.values.len()],
                    v: vec![0.0; p.values.len()],
                })
                .collect();
        }
        if self.moments.len() != params.len() {
            return Err(Error::contract(
                "adam: parameter layout changed between steps".to_string(),
            ));
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);

        for ((param, grad), state) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            if param.name != grad.name || param.values.len() != grad.values.len() {
                return Err(Error::contract(format!(
                    "adam: slot {:?} does not line up with gradient {:?}",
                    param.name, grad.name
                )));
            }
            let wd = if param.weight_matrix { decay } else { 0.0 };
            for (i, theta) in param.values.iter_mut().enumerate() {
                let g = grad.values[i] + wd * *theta;
                state.m[i] = self.beta1 * state.m[i] + (1.0 - self.beta1) * g;
                state.v[i] = self.beta2 * state.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = state.m[i] / bias1;
                let v_hat = state.v[i] / bias2;
                *theta -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new()
    }
}
