//! Bilinear normalization: per-sample standardization of a D×T series along
//! both tensor modes, followed by learned per-mode scale/shift and a learned
//! non-negative combination of the two paths.
//!
//! Temporal path: every row (feature slice) is centered by its mean over
//! time and divided by its population standard deviation plus epsilon, then
//! scaled by `gamma2[d]` and shifted by `beta2[d]`. Feature path: the same
//! along columns with `gamma1[t]`, `beta1[t]`. The output is
//! `lambda1 * feature_path + lambda2 * temporal_path`. Statistics are
//! per-sample only; no information crosses samples.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::{GradSlot, Slot, SlotMut};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct BinParams {
    /// Temporal-path scale, length D.
    pub gamma2: Vec<f64>,
    /// Temporal-path shift, length D.
    pub beta2: Vec<f64>,
    /// Feature-path scale, length T.
    pub gamma1: Vec<f64>,
    /// Feature-path shift, length T.
    pub beta1: Vec<f64>,
    /// Feature-path weight, kept non-negative by the post-step projection.
    pub lambda1: f64,
    /// Temporal-path weight, kept non-negative by the post-step projection.
    pub lambda2: f64,
    pub epsilon: f64,
    /// Divide the feature path by the temporal std instead of the feature
    /// std (the formula as literally printed; requires D == T). Off by
    /// default.
    pub literal_feature_divisor: bool,
}

/// Per-sample statistics saved by the forward pass for backward.
#[derive(Clone, Debug)]
pub struct BinCache {
    d: usize,
    t: usize,
    z2: Vec<Matrix>,
    z1: Vec<Matrix>,
    /// Temporal (row) stds, length D per sample.
    sig2: Vec<Vec<f64>>,
    /// Feature-path column divisor (std + eps), length T per sample.
    den1: Vec<Vec<f64>>,
    /// Feature (column) stds, length T per sample; empty in literal mode.
    sig1: Vec<Vec<f64>>,
    literal: bool,
}

#[derive(Clone, Debug)]
pub struct BinGrads {
    pub gamma2: Vec<f64>,
    pub beta2: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub beta1: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl BinParams {
    /// Unit scale, zero shift, lambdas 0.5 each: the layer starts as an
    /// exact two-mode standardizer with output variance comparable to a
    /// single standardized path.
    pub fn new(d: usize, t: usize) -> Self {
        BinParams {
            gamma2: vec![1.0; d],
            beta2: vec![0.0; d],
            gamma1: vec![1.0; t],
            beta1: vec![0.0; t],
            lambda1: 0.5,
            lambda2: 0.5,
            epsilon: DEFAULT_EPSILON,
            literal_feature_divisor: false,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.gamma2.len()
    }

    pub fn time_dim(&self) -> usize {
        self.gamma1.len()
    }

    /// 2(D + T) + 2.
    pub fn param_count(&self) -> usize {
        2 * (self.feature_dim() + self.time_dim()) + 2
    }

    /// Post-step projection: a negative lambda is set to 0.
    pub fn clamp_lambdas(&mut self) {
        self.lambda1 = self.lambda1.max(0.0);
        self.lambda2 = self.lambda2.max(0.0);
    }

    fn check_sample(&self, x: &Matrix, op: &'static str) -> Result<()> {
        if x.shape() != (self.feature_dim(), self.time_dim()) {
            return Err(Error::shape(
                op,
                x.shape(),
                (self.feature_dim(), self.time_dim()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, xs: &[Matrix]) -> Result<(Vec<Matrix>, BinCache)> {
        let (d, t) = (self.feature_dim(), self.time_dim());
        if self.literal_feature_divisor && d != t {
            return Err(Error::config(format!(
                "literal feature divisor needs a square input (the printed \
                 divisor has length D={d}, the feature path needs length T={t})"
            )));
        }
        let mut outs = Vec::with_capacity(xs.len());
        let mut cache = BinCache {
            d,
            t,
            z2: Vec::with_capacity(xs.len()),
            z1: Vec::with_capacity(xs.len()),
            sig2: Vec::with_capacity(xs.len()),
            den1: Vec::with_capacity(xs.len()),
            sig1: Vec::with_capacity(xs.len()),
            literal: self.literal_feature_divisor,
        };
        for x in xs {
            self.check_sample(x, "bin_forward")?;
            let mean2 = x.row_mean();
            let sig2 = x.row_std();
            let z2 = Matrix::from_fn(d, t, |i, j| {
                (x.get(i, j) - mean2[i]) / (sig2[i] + self.epsilon)
            });

            let mean1 = x.col_mean();
            let (sig1, den1): (Vec<f64>, Vec<f64>) = if self.literal_feature_divisor {
                (Vec::new(), sig2.iter().map(|&s| s + self.epsilon).collect())
            } else {
                let s1 = x.col_std();
                let den = s1.iter().map(|&s| s + self.epsilon).collect();
                (s1, den)
            };
            let z1 = Matrix::from_fn(d, t, |i, j| (x.get(i, j) - mean1[j]) / den1[j]);

            let out = Matrix::from_fn(d, t, |i, j| {
                let xt2 = self.gamma2[i] * z2.get(i, j) + self.beta2[i];
                let xt1 = self.gamma1[j] * z1.get(i, j) + self.beta1[j];
                self.lambda1 * xt1 + self.lambda2 * xt2
            });
            outs.push(out);
            cache.z2.push(z2);
            cache.z1.push(z1);
            cache.sig2.push(sig2);
            cache.den1.push(den1);
            cache.sig1.push(sig1);
        }
        Ok((outs, cache))
    }

    #[allow(clippy::needless_range_loop)] // parallel vector/matrix indexing
    pub fn backward(
        &self,
        grad_out: &[Matrix],
        cache: &BinCache,
    ) -> Result<(Vec<Matrix>, BinGrads)> {
        if grad_out.len() != cache.z2.len() {
            return Err(Error::contract(format!(
                "bin_backward: cache holds {} samples, gradient holds {}",
                cache.z2.len(),
                grad_out.len()
            )));
        }
        if cache.literal != self.literal_feature_divisor
            || cache.d != self.feature_dim()
            || cache.t != self.time_dim()
        {
            return Err(Error::contract(
                "bin_backward: cache does not match these parameters".to_string(),
            ));
        }
        let (d, t) = (cache.d, cache.t);
        let mut grads = BinGrads {
            gamma2: vec![0.0; d],
            beta2: vec![0.0; d],
            gamma1: vec![0.0; t],
            beta1: vec![0.0; t],
            lambda1: 0.0,
            lambda2: 0.0,
        };
        let mut grad_in = Vec::with_capacity(grad_out.len());

        for (s, g) in grad_out.iter().enumerate() {
            if g.shape() != (d, t) {
                return Err(Error::contract(format!(
                    "bin_backward: gradient sample {s} has shape {}x{}, cache expects {d}x{t}",
                    g.shape().0,
                    g.shape().1
                )));
            }
            let z2 = &cache.z2[s];
            let z1 = &cache.z1[s];
            let sig2 = &cache.sig2[s];
            let den1 = &cache.den1[s];

            for i in 0..d {
                for j in 0..t {
                    let gij = g.get(i, j);
                    let xt2 = self.gamma2[i] * z2.get(i, j) + self.beta2[i];
                    let xt1 = self.gamma1[j] * z1.get(i, j) + self.beta1[j];
                    grads.lambda1 += gij * xt1;
                    grads.lambda2 += gij * xt2;
                    grads.gamma2[i] += self.lambda2 * gij * z2.get(i, j);
                    grads.beta2[i] += self.lambda2 * gij;
                    grads.gamma1[j] += self.lambda1 * gij * z1.get(i, j);
                    grads.beta1[j] += self.lambda1 * gij;
                }
            }

            let mut gi = Matrix::zeros(d, t);

            // Temporal path: rows are independent standardizations.
            for i in 0..d {
                let den2 = sig2[i] + self.epsilon;
                let h: Vec<f64> = (0..t)
                    .map(|j| self.lambda2 * g.get(i, j) * self.gamma2[i])
                    .collect();
                let h_mean = h.iter().sum::<f64>() / t as f64;
                let hz: f64 = (0..t).map(|j| h[j] * z2.get(i, j)).sum();
                for j in 0..t {
                    let mut v = (h[j] - h_mean) / den2;
                    if sig2[i] > 0.0 {
                        v -= z2.get(i, j) * hz / (t as f64 * sig2[i]);
                    }
                    *gi.row_mut(i).get_mut(j).unwrap() += v;
                }
            }

            // Feature path.
            if !self.literal_feature_divisor {
                let sig1 = &cache.sig1[s];
                for j in 0..t {
                    let h: Vec<f64> = (0..d)
                        .map(|i| self.lambda1 * g.get(i, j) * self.gamma1[j])
                        .collect();
                    let h_mean = h.iter().sum::<f64>() / d as f64;
                    let hz: f64 = (0..d).map(|i| h[i] * z1.get(i, j)).sum();
                    for i in 0..d {
                        let mut v = (h[i] - h_mean) / den1[j];
                        if sig1[j] > 0.0 {
                            v -= z1.get(i, j) * hz / (d as f64 * sig1[j]);
                        }
                        *gi.row_mut(i).get_mut(j).unwrap() += v;
                    }
                }
            } else {
                // Divisor for column t is the std of row t (needs D == T), so
                // the chain through the divisor lands on the entries of row t.
                let h = Matrix::from_fn(d, t, |i, j| self.lambda1 * g.get(i, j) * self.gamma1[j]);
                let col_mean_h = h.col_mean();
                for j in 0..t {
                    for i in 0..d {
                        let v = (h.get(i, j) - col_mean_h[j]) / den1[j];
                        *gi.row_mut(i).get_mut(j).unwrap() += v;
                    }
                }
                for u in 0..t {
                    if sig2[u] <= 0.0 {
                        continue;
                    }
                    let s1u: f64 = (0..d).map(|i| h.get(i, u) * z1.get(i, u)).sum();
                    let den2u = sig2[u] + self.epsilon;
                    for v in 0..t {
                        let c2 = z2.get(u, v) * den2u;
                        let delta = s1u * c2 / (t as f64 * sig2[u] * den1[u]);
                        *gi.row_mut(u).get_mut(v).unwrap() -= delta;
                    }
                }
            }
            grad_in.push(gi);
        }
        Ok((grad_in, grads))
    }

    pub fn slots(&self) -> Vec<Slot<'_>> {
        vec![
            Slot::vector("gamma2", &self.gamma2),
            Slot::vector("beta2", &self.beta2),
            Slot::vector("gamma1", &self.gamma1),
            Slot::vector("beta1", &self.beta1),
            Slot::scalar("lambda1", &self.lambda1),
            Slot::scalar("lambda2", &self.lambda2),
        ]
    }

    pub fn slots_mut(&mut self) -> Vec<SlotMut<'_>> {
        vec![
            SlotMut::vector("gamma2", &mut self.gamma2),
            SlotMut::vector("beta2", &mut self.beta2),
            SlotMut::vector("gamma1", &mut self.gamma1),
            SlotMut::vector("beta1", &mut self.beta1),
            SlotMut::scalar("lambda1", &mut self.lambda1),
            SlotMut::scalar("lambda2", &mut self.lambda2),
        ]
    }
}

impl BinGrads {
    pub fn slots(&self) -> Vec<GradSlot<'_>> {
        vec![
            GradSlot::vector("gamma2", &self.gamma2),
            GradSlot::vector("beta2", &self.beta2),
            GradSlot::vector("gamma1", &self.gamma1),
            GradSlot::vector("beta1", &self.beta1),
            GradSlot::scalar("lambda1", &self.lambda1),
            GradSlot::scalar("lambda2", &self.lambda2),
        ]
    }
}
