//! Temporal-attention-augmented bilinear layer.
//!
//! Forward, for input X (D×T):
//!   X̄ = W1 · X                    feature projection, D1×T
//!   E = X̄ · W                     attention energies, W is T×T
//!   A = row_softmax(E)             each row attends over the T steps
//!   X̃ = λ (X̄ ⊙ A) + (1 − λ) X̄    convex blend of attended and plain
//!   Y = X̃ · W2 + bias             temporal projection, D1×T1
//!
//! The diagonal of W is held fixed at 1/T (its gradient is discarded and
//! the value re-pinned after every optimizer step) and λ is projected back
//! into [0, 1].

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::{GradSlot, Slot, SlotMut};
use crate::rng::Rng;

#[derive(Clone, Debug)]
pub struct TablLayer {
    /// D1×D.
    pub w1: Matrix,
    /// T×T attention weight, diagonal fixed at 1/T.
    pub w: Matrix,
    /// T×T1.
    pub w2: Matrix,
    /// Attention blend, kept in [0, 1].
    pub lambda: f64,
    /// D1×T1.
    pub bias: Matrix,
}

#[derive(Clone, Debug)]
pub struct TablCache {
    x: Matrix,
    xbar: Matrix,
    att: Matrix,
    xmix: Matrix,
}

#[derive(Clone, Debug)]
pub struct TablGrads {
    pub w1: Matrix,
    pub w: Matrix,
    pub w2: Matrix,
    pub lambda: f64,
    pub bias: Matrix,
}

impl TablLayer {
    pub fn new(rng: &mut Rng, d_in: usize, t_in: usize, d_out: usize, t_out: usize) -> Self {
        let mut layer = TablLayer {
            w1: Matrix::glorot_uniform(rng, d_out, d_in),
            w: Matrix::glorot_uniform(rng, t_in, t_in),
            w2: Matrix::glorot_uniform(rng, t_in, t_out),
            lambda: 0.5,
            bias: Matrix::zeros(d_out, t_out),
        };
        layer.enforce_constraints();
        layer
    }

    pub fn in_shape(&self) -> (usize, usize) {
        (self.w1.cols(), self.w2.rows())
    }

    pub fn out_shape(&self) -> (usize, usize) {
        (self.w1.rows(), self.w2.cols())
    }

    pub fn param_count(&self) -> usize {
        self.w1.data().len() + self.w.data().len() + self.w2.data().len()
            + self.bias.data().len()
            + 1
    }

    /// Re-pin diag(W) to 1/T and project λ back into [0, 1].
    pub fn enforce_constraints(&mut self) {
        let t = self.w.rows();
        for i in 0..t {
            self.w.set(i, i, 1.0 / t as f64);
        }
        self.lambda = self.lambda.clamp(0.0, 1.0);
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, TablCache)> {
        if x.shape() != self.in_shape() {
            return Err(Error::shape("tabl_forward", x.shape(), self.in_shape()));
        }
        let xbar = self.w1.matmul(x)?;
        let energies = xbar.matmul(&self.w)?;
        let att = energies.row_softmax();
        let attended = xbar.hadamard(&att)?;
        let xmix = attended.scale(self.lambda).add(&xbar.scale(1.0 - self.lambda))?;
        let y = xmix.matmul(&self.w2)?.add(&self.bias)?;
        Ok((
            y,
            TablCache {
                x: x.clone(),
                xbar,
                att,
                xmix,
            },
        ))
    }

    pub fn backward(&self, grad_out: &Matrix, cache: &TablCache) -> Result<(Matrix, TablGrads)> {
        if grad_out.shape() != self.out_shape() {
            return Err(Error::shape(
                "tabl_backward",
                grad_out.shape(),
                self.out_shape(),
            ));
        }
        let d_xmix = grad_out.matmul(&self.w2.transpose())?;
        let d_w2 = cache.xmix.transpose().matmul(grad_out)?;

        let attended_minus_plain = cache.xbar.hadamard(&cache.att)?.sub(&cache.xbar)?;
        let d_lambda = d_xmix.frob_dot(&attended_minus_plain)?;

        let mut d_xbar = d_xmix
            .hadamard(&cache.att)?
            .scale(self.lambda)
            .add(&d_xmix.scale(1.0 - self.lambda))?;
        let d_att = d_xmix.hadamard(&cache.xbar)?.scale(self.lambda);

        // Softmax rows: dE = A ⊙ (dA − rowsum(dA ⊙ A)).
        let (rows, t) = cache.att.shape();
        let mut d_energies = Matrix::zeros(rows, t);
        for r in 0..rows {
            let dot: f64 = (0..t).map(|j| d_att.get(r, j) * cache.att.get(r, j)).sum();
            for j in 0..t {
                d_energies.set(r, j, cache.att.get(r, j) * (d_att.get(r, j) - dot));
            }
        }

        let mut d_w = cache.xbar.transpose().matmul(&d_energies)?;
        for i in 0..t {
            d_w.set(i, i, 0.0); // diagonal is pinned
        }
        d_xbar.add_assign(&d_energies.matmul(&self.w.transpose())?)?;

        let grad_in = self.w1.transpose().matmul(&d_xbar)?;
        let d_w1 = d_xbar.matmul(&cache.x.transpose())?;

        Ok((
            grad_in,
            TablGrads {
                w1: d_w1,
                w: d_w,
                w2: d_w2,
                lambda: d_lambda,
                bias: grad_out.clone(),
            },
        ))
    }

    pub fn slots(&self) -> Vec<Slot<'_>> {
        vec![
            Slot::matrix("w1", &self.w1).weight(),
            Slot::matrix("w", &self.w).pinned_diag(),
            Slot::matrix("w2", &self.w2).weight(),
            Slot::scalar("lambda", &self.lambda),
            Slot::matrix("bias", &self.bias),
        ]
    }

    pub fn slots_mut(&mut self) -> Vec<SlotMut<'_>> {
        vec![
            SlotMut::matrix("w1", &mut self.w1).weight(),
            SlotMut::matrix("w", &mut self.w).pinned_diag(),
            SlotMut::matrix("w2", &mut self.w2).weight(),
            SlotMut::scalar("lambda", &mut self.lambda),
            SlotMut::matrix("bias", &mut self.bias),
        ]
    }
}

impl TablGrads {
    pub fn slots(&self) -> Vec<GradSlot<'_>> {
        vec![
            GradSlot::matrix("w1", &self.w1),
            GradSlot::matrix("w", &self.w),
            GradSlot::matrix("w2", &self.w2),
            GradSlot::scalar("lambda", &self.lambda),
            GradSlot::matrix("bias", &self.bias),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::bilinear::{Activation, BilinearLayer};

    #[test]
    fn lambda_zero_reduces_to_bilinear() {
        let mut rng = Rng::new(21);
        let mut tabl = TablLayer::new(&mut rng, 4, 5, 3, 2);
        tabl.lambda = 0.0;
        let bl = BilinearLayer {
            w1: tabl.w1.clone(),
            w2: tabl.w2.clone(),
            bias: tabl.bias.clone(),
            activation: Activation::None,
        };
        let x = Matrix::from_fn(4, 5, |_, _| rng.normal());
        let (y_tabl, _) = tabl.forward(&x).unwrap();
        let (y_bl, _) = bl.forward(&x).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!((y_tabl.get(i, j) - y_bl.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_attention_closed_form() {
        // Constant energies per row give A = 1/T, so with λ = 1 the mix is X̄/T.
        let mut rng = Rng::new(3);
        let mut tabl = TablLayer::new(&mut rng, 3, 4, 2, 1);
        tabl.w = Matrix::zeros(4, 4); // E = 0 regardless of X̄
        tabl.lambda = 1.0;
        let x = Matrix::from_fn(3, 4, |_, _| rng.normal());
        let (_, cache) = tabl.forward(&x).unwrap();
        for i in 0..2 {
            for j in 0..4 {
                assert!((cache.att.get(i, j) - 0.25).abs() < 1e-15);
                let want = cache.xbar.get(i, j) / 4.0;
                assert!((cache.xmix.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = Rng::new(14);
        let tabl = TablLayer::new(&mut rng, 5, 6, 4, 2);
        let x = Matrix::from_fn(5, 6, |_, _| rng.uniform(-3.0, 3.0));
        let (_, cache) = tabl.forward(&x).unwrap();
        for r in 0..cache.att.rows() {
            let sum: f64 = cache.att.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for &a in cache.att.row(r) {
                assert!(a > 0.0 && a < 1.0);
            }
        }
    }

    #[test]
    fn constraints_pin_diag_and_clamp_lambda() {
        let mut rng = Rng::new(2);
        let mut tabl = TablLayer::new(&mut rng, 3, 5, 2, 1);
        tabl.lambda = 1.7;
        tabl.w.set(2, 2, 42.0);
        tabl.enforce_constraints();
        assert_eq!(tabl.lambda, 1.0);
        for i in 0..5 {
            assert_eq!(tabl.w.get(i, i), 0.2);
        }
    }

    #[test]
    fn lambda_gradient_identity() {
        let mut rng = Rng::new(77);
        let tabl = TablLayer::new(&mut rng, 4, 5, 3, 2);
        let x = Matrix::from_fn(4, 5, |_, _| rng.normal());
        let g = Matrix::from_fn(3, 2, |_, _| rng.normal());
        let (_, cache) = tabl.forward(&x).unwrap();
        let (_, grads) = tabl.backward(&g, &cache).unwrap();
        let d_xmix = g.matmul(&tabl.w2.transpose()).unwrap();
        let diff = cache
            .xbar
            .hadamard(&cache.att)
            .unwrap()
            .sub(&cache.xbar)
            .unwrap();
        let want = d_xmix.frob_dot(&diff).unwrap();
        assert!((grads.lambda - want).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_gives_zero_grads() {
        let mut rng = Rng::new(8);
        let tabl = TablLayer::new(&mut rng, 4, 5, 3, 2);
        let x = Matrix::from_fn(4, 5, |_, _| rng.normal());
        let (_, cache) = tabl.forward(&x).unwrap();
        let (gi, grads) = tabl.backward(&Matrix::zeros(3, 2), &cache).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(grads.w1.data().iter().all(|&v| v == 0.0));
        assert_eq!(grads.lambda, 0.0);
    }
}
