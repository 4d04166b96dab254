//! Bilinear layer: y = act(W1 · X · W2 + bias).
//!
//! W1 mixes feature slices (rows), W2 mixes temporal slices (columns),
//! so the two tensor modes are modeled separately.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::{GradSlot, Slot, SlotMut};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

impl Activation {
    fn apply(&self, m: &Matrix) -> Matrix {
        match self {
            Activation::Relu => m.map(|v| v.max(0.0)),
            Activation::None => m.clone(),
        }
    }

    fn grad_mask(&self, pre: &Matrix, g: &Matrix) -> Result<Matrix> {
        match self {
            Activation::Relu => g.zip_map(pre, |gv, pv| if pv > 0.0 { gv } else { 0.0 }),
            Activation::None => Ok(g.clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BilinearLayer {
    /// D1×D.
    pub w1: Matrix,
    /// T×T1.
    pub w2: Matrix,
    /// D1×T1.
    pub bias: Matrix,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct BilinearCache {
    x: Matrix,
    /// X · W2.
    xw2: Matrix,
    pre: Matrix,
}

impl BilinearCache {
    /// Distance of the closest pre-activation to the relu kink. Used by the
    /// finite-difference harness to reject ill-conditioned check instances.
    pub(crate) fn min_abs_pre(&self) -> f64 {
        self.pre
            .data()
            .iter()
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct BilinearGrads {
    pub w1: Matrix,
    pub w2: Matrix,
    pub bias: Matrix,
}

impl BilinearLayer {
    pub fn new(
        rng: &mut Rng,
        d_in: usize,
        t_in: usize,
        d_out: usize,
        t_out: usize,
        activation: Activation,
    ) -> Self {
        BilinearLayer {
            w1: Matrix::glorot_uniform(rng, d_out, d_in),
            w2: Matrix::glorot_uniform(rng, t_in, t_out),
            bias: Matrix::zeros(d_out, t_out),
            activation,
        }
    }

    pub fn in_shape(&self) -> (usize, usize) {
        (self.w1.cols(), self.w2.rows())
    }

    pub fn out_shape(&self) -> (usize, usize) {
        (self.w1.rows(), self.w2.cols())
    }

    pub fn param_count(&self) -> usize {
        self.w1.data().len() + self.w2.data().len() + self.bias.data().len()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, BilinearCache)> {
        if x.shape() != self.in_shape() {
            return Err(Error::shape("bilinear_forward", x.shape(), self.in_shape()));
        }
        let xw2 = x.matmul(&self.w2)?;
        let pre = self.w1.matmul(&xw2)?.add(&self.bias)?;
        let y = self.activation.apply(&pre);
        Ok((
            y,
            BilinearCache {
                x: x.clone(),
                xw2,
                pre,
            },
        ))
    }

    pub fn backward(&self, grad_out: &Matrix, cache: &BilinearCache) -> Result<(Matrix, BilinearGrads)> {
        if grad_out.shape() != self.out_shape() {
            return Err(Error::shape(
                "bilinear_backward",
                grad_out.shape(),
                self.out_shape(),
            ));
        }
        let g_pre = self.activation.grad_mask(&cache.pre, grad_out)?;
        let grads = BilinearGrads {
            w1: g_pre.matmul(&cache.xw2.transpose())?,
            w2: cache.x.transpose().matmul(&self.w1.transpose().matmul(&g_pre)?)?,
            bias: g_pre.clone(),
        };
        let d_xw2 = self.w1.transpose().matmul(&g_pre)?;
        let grad_in = d_xw2.matmul(&self.w2.transpose())?;
        Ok((grad_in, grads))
    }

    pub fn slots(&self) -> Vec<Slot<'_>> {
        vec![
            Slot::matrix("w1", &self.w1).weight(),
            Slot::matrix("w2", &self.w2).weight(),
            Slot::matrix("bias", &self.bias),
        ]
    }

    pub fn slots_mut(&mut self) -> Vec<SlotMut<'_>> {
        vec![
            SlotMut::matrix("w1", &mut self.w1).weight(),
            SlotMut::matrix("w2", &mut self.w2).weight(),
            SlotMut::matrix("bias", &mut self.bias),
        ]
    }
}

impl BilinearGrads {
    pub fn slots(&self) -> Vec<GradSlot<'_>> {
        vec![
            GradSlot::matrix("w1", &self.w1),
            GradSlot::matrix("w2", &self.w2),
            GradSlot::matrix("bias", &self.bias),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_projection_passes_input_through() {
        let mut layer = BilinearLayer::new(&mut Rng::new(1), 3, 4, 3, 4, Activation::None);
        layer.w1 = Matrix::identity(3);
        layer.w2 = Matrix::identity(4);
        layer.bias = Matrix::zeros(3, 4);
        let x = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn sum_of_entries_oracle() {
        let mut layer = BilinearLayer::new(&mut Rng::new(1), 2, 2, 1, 1, Activation::None);
        layer.w1 = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        layer.w2 = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        layer.bias = Matrix::zeros(1, 1);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.get(0, 0), 10.0);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        let mut layer = BilinearLayer::new(&mut Rng::new(1), 2, 2, 1, 1, Activation::Relu);
        layer.w1 = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        layer.w2 = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        layer.bias = Matrix::filled(1, 1, -100.0);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let (y, cache) = layer.forward(&x).unwrap();
        assert_eq!(y.get(0, 0), 0.0);

        // And the gradient is blocked there.
        let (gi, grads) = layer.backward(&Matrix::filled(1, 1, 1.0), &cache).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(grads.w1.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let layer = BilinearLayer::new(&mut Rng::new(1), 3, 4, 2, 2, Activation::None);
        assert!(layer.forward(&Matrix::zeros(4, 3)).is_err());
    }
}
