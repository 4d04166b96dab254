//! Input-level batch normalization over D×T samples.
//!
//! Statistics are per (d, t) entry across the batch, preserving the series
//! structure. Training mode standardizes with batch statistics and folds
//! them into the running estimates (`running = (1 − momentum) * running +
//! momentum * batch`); inference mode uses the running estimates and never
//! mutates state.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::{GradSlot, Slot, SlotMut};

#[derive(Clone, Debug)]
pub struct BatchNormParams {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub running_mean: Matrix,
    pub running_var: Matrix,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct BnCache {
    training: bool,
    xhat: Vec<Matrix>,
    inv_std: Matrix,
}

#[derive(Clone, Debug)]
pub struct BnGrads {
    pub gamma: Matrix,
    pub beta: Matrix,
}

impl BatchNormParams {
    pub fn new(d: usize, t: usize) -> Self {
        BatchNormParams {
            gamma: Matrix::filled(d, t, 1.0),
            beta: Matrix::zeros(d, t),
            running_mean: Matrix::zeros(d, t),
            running_var: Matrix::filled(d, t, 1.0),
            momentum: 0.1,
            epsilon: super::bin::DEFAULT_EPSILON,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.gamma.shape()
    }

    /// Trainable parameters only (gamma and beta); the running statistics
    /// are buffers.
    pub fn param_count(&self) -> usize {
        let (d, t) = self.shape();
        2 * d * t
    }

    fn check_batch(&self, xs: &[Matrix], op: &'static str) -> Result<()> {
        for x in xs {
            if x.shape() != self.shape() {
                return Err(Error::shape(op, x.shape(), self.shape()));
            }
        }
        Ok(())
    }

    pub fn forward(&mut self, xs: &[Matrix], training: bool) -> Result<(Vec<Matrix>, BnCache)> {
        self.check_batch(xs, "batchnorm_forward")?;
        let (d, t) = self.shape();
        let n = xs.len();

        let (mean, var) = if training {
            if n < 2 {
                return Err(Error::contract(format!(
                    "batch normalization in training mode needs at least 2 samples, got {n}"
                )));
            }
            let mut mean = Matrix::zeros(d, t);
            for x in xs {
                mean.add_assign(x)?;
            }
            let mean = mean.scale(1.0 / n as f64);
            let mut var = Matrix::zeros(d, t);
            for x in xs {
                let dev = x.sub(&mean)?;
                var.add_assign(&dev.hadamard(&dev)?)?;
            }
            let var = var.scale(1.0 / n as f64);

            let m = self.momentum;
            self.running_mean = self.running_mean.scale(1.0 - m).add(&mean.scale(m))?;
            self.running_var = self.running_var.scale(1.0 - m).add(&var.scale(m))?;
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };

        let inv_std = var.map(|v| 1.0 / (v + self.epsilon).sqrt());
        let mut outs = Vec::with_capacity(n);
        let mut xhat = Vec::with_capacity(n);
        for x in xs {
            let h = x.sub(&mean)?.hadamard(&inv_std)?;
            outs.push(h.hadamard(&self.gamma)?.add(&self.beta)?);
            xhat.push(h);
        }
        Ok((
            outs,
            BnCache {
                training,
                xhat,
                inv_std,
            },
        ))
    }

    pub fn backward(&self, grad_out: &[Matrix], cache: &BnCache) -> Result<(Vec<Matrix>, BnGrads)> {
        let n = cache.xhat.len();
        if grad_out.len() != n {
            return Err(Error::contract(format!(
                "batchnorm_backward: cache holds {n} samples, gradient holds {}",
                grad_out.len()
            )));
        }
        self.check_batch(grad_out, "batchnorm_backward")?;
        let (d, t) = self.shape();

        let mut grads = BnGrads {
            gamma: Matrix::zeros(d, t),
            beta: Matrix::zeros(d, t),
        };
        for (g, h) in grad_out.iter().zip(&cache.xhat) {
            grads.gamma.add_assign(&g.hadamard(h)?)?;
            grads.beta.add_assign(g)?;
        }

        let mut grad_in = Vec::with_capacity(n);
        if cache.training {
            // Batch stats depend on every sample.
            let mut sum_h = Matrix::zeros(d, t);
            let mut sum_hx = Matrix::zeros(d, t);
            for (g, h) in grad_out.iter().zip(&cache.xhat) {
                let gg = g.hadamard(&self.gamma)?;
                sum_h.add_assign(&gg)?;
                sum_hx.add_assign(&gg.hadamard(h)?)?;
            }
            for (g, h) in grad_out.iter().zip(&cache.xhat) {
                let gg = g.hadamard(&self.gamma)?;
                let gi = Matrix::from_fn(d, t, |i, j| {
                    let term = n as f64 * gg.get(i, j) - sum_h.get(i, j)
                        - h.get(i, j) * sum_hx.get(i, j);
                    term * cache.inv_std.get(i, j) / n as f64
                });
                grad_in.push(gi);
            }
        } else {
            for g in grad_out {
                grad_in.push(g.hadamard(&self.gamma)?.hadamard(&cache.inv_std)?);
            }
        }
        Ok((grad_in, grads))
    }

    pub fn slots(&self) -> Vec<Slot<'_>> {
        vec![
            Slot::matrix("gamma", &self.gamma),
            Slot::matrix("beta", &self.beta),
            Slot::matrix("running_mean", &self.running_mean).buffer(),
            Slot::matrix("running_var", &self.running_var).buffer(),
        ]
    }

    pub fn slots_mut(&mut self) -> Vec<SlotMut<'_>> {
        vec![
            SlotMut::matrix("gamma", &mut self.gamma),
            SlotMut::matrix("beta", &mut self.beta),
            SlotMut::matrix("running_mean", &mut self.running_mean).buffer(),
            SlotMut::matrix("running_var", &mut self.running_var).buffer(),
        ]
    }
}

impl BnGrads {
    pub fn slots(&self) -> Vec<GradSlot<'_>> {
        vec![
            GradSlot::matrix("gamma", &self.gamma),
            GradSlot::matrix("beta", &self.beta),
        ]
    }
}
