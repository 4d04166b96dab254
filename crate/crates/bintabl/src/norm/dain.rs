//! Deep adaptive input normalization: learned shift, scale and sigmoid
//! gating of the temporal slices of each sample.
//!
//! Three stages per sample X (D×T, columns are temporal slices):
//!   shift:  y(t) = x(t) − Wa·a,          a = mean over t of x(t)
//!   scale:  z(t) = y(t) ⊘ (Wb·b + eps),  b = sqrt(mean over t of y(t)²)
//!   gate:   out(t) = z(t) ⊙ sigmoid(Wc·c + wd),  c = mean over t of z(t)
//!
//! With Wa = Wb = I, Wc = 0 and a saturating positive wd this reduces to
//! plain per-row z-scoring, which is also how the layer is initialized.

use crate::error::{Error, Result};
use crate::matrix::{outer, Matrix};
use crate::params::{GradSlot, Slot, SlotMut};

#[derive(Clone, Debug)]
pub struct DainParams {
    pub wa: Matrix,
    pub wb: Matrix,
    pub wc: Matrix,
    pub wd: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct DainCache {
    d: usize,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    /// Wb·b + eps, the per-row divisor.
    sbeta: Vec<Vec<f64>>,
    gate: Vec<Vec<f64>>,
    z: Vec<Matrix>,
}

#[derive(Clone, Debug)]
pub struct DainGrads {
    pub wa: Matrix,
    pub wb: Matrix,
    pub wc: Matrix,
    pub wd: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl DainParams {
    /// Identity shift/scale estimators, zero gate weights and a positive
    /// gate bias, so the layer starts as per-row z-scoring with an almost
    /// open gate.
    pub fn new(d: usize) -> Self {
        DainParams {
            wa: Matrix::identity(d),
            wb: Matrix::identity(d),
            wc: Matrix::zeros(d, d),
            wd: vec![3.0; d],
            epsilon: super::bin::DEFAULT_EPSILON,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.wd.len()
    }

    pub fn param_count(&self) -> usize {
        let d = self.feature_dim();
        3 * d * d + d
    }

    pub fn forward(&self, xs: &[Matrix]) -> Result<(Vec<Matrix>, DainCache)> {
        let d = self.feature_dim();
        let mut outs = Vec::with_capacity(xs.len());
        let mut cache = DainCache {
            d,
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            sbeta: Vec::new(),
            gate: Vec::new(),
            z: Vec::new(),
        };
        for x in xs {
            if x.rows() != d {
                return Err(Error::shape("dain_forward", x.shape(), (d, x.cols())));
            }
            let t = x.cols();

            let a = x.row_mean();
            let alpha = self.wa.matvec(&a)?;
            let y = Matrix::from_fn(d, t, |i, j| x.get(i, j) - alpha[i]);

            let b: Vec<f64> = (0..d)
                .map(|i| {
                    let ss: f64 = y.row(i).iter().map(|&v| v * v).sum();
                    (ss / t as f64).sqrt()
                })
                .collect();
            let sbeta: Vec<f64> = self
                .wb
                .matvec(&b)?
                .into_iter()
                .map(|v| v + self.epsilon)
                .collect();
            let z = Matrix::from_fn(d, t, |i, j| y.get(i, j) / sbeta[i]);

            let c = z.row_mean();
            let gate: Vec<f64> = self
                .wc
                .matvec(&c)?
                .iter()
                .zip(&self.wd)
                .map(|(&u, &w)| sigmoid(u + w))
                .collect();

            outs.push(Matrix::from_fn(d, t, |i, j| z.get(i, j) * gate[i]));
            cache.a.push(a);
            cache.b.push(b);
            cache.c.push(c);
            cache.sbeta.push(sbeta);
            cache.gate.push(gate);
            cache.z.push(z);
        }
        Ok((outs, cache))
    }

    pub fn backward(
        &self,
        grad_out: &[Matrix],
        cache: &DainCache,
    ) -> Result<(Vec<Matrix>, DainGrads)> {
        if grad_out.len() != cache.z.len() {
            return Err(Error::contract(format!(
                "dain_backward: cache holds {} samples, gradient holds {}",
                cache.z.len(),
                grad_out.len()
            )));
        }
        let d = cache.d;
        let mut grads = DainGrads {
            wa: Matrix::zeros(d, d),
            wb: Matrix::zeros(d, d),
            wc: Matrix::zeros(d, d),
            wd: vec![0.0; d],
        };
        let mut grad_in = Vec::with_capacity(grad_out.len());

        for (s, g) in grad_out.iter().enumerate() {
            let z = &cache.z[s];
            let t = z.cols();
            if g.shape() != z.shape() {
                return Err(Error::contract(format!(
                    "dain_backward: gradient sample {s} has shape {}x{}, cache expects {}x{}",
                    g.shape().0,
                    g.shape().1,
                    z.shape().0,
                    z.shape().1
                )));
            }
            let gate = &cache.gate[s];
            let sbeta = &cache.sbeta[s];
            let b = &cache.b[s];

            // Gate stage.
            let q: Vec<f64> = (0..d)
                .map(|i| (0..t).map(|j| g.get(i, j) * z.get(i, j)).sum())
                .collect();
            let u: Vec<f64> = (0..d).map(|i| q[i] * gate[i] * (1.0 - gate[i])).collect();
            grads.wc.add_assign(&outer(&u, &cache.c[s]))?;
            for (g, &ui) in grads.wd.iter_mut().zip(&u) {
                *g += ui;
            }
            let dc = self.wc.transpose().matvec(&u)?;
            let hz = Matrix::from_fn(d, t, |i, j| g.get(i, j) * gate[i] + dc[i] / t as f64);

            // Scale stage.
            let dbeta: Vec<f64> = (0..d)
                .map(|i| {
                    let acc: f64 = (0..t).map(|j| hz.get(i, j) * z.get(i, j)).sum();
                    -acc / sbeta[i]
                })
                .collect();
            grads.wb.add_assign(&outer(&dbeta, b))?;
            let db = self.wb.transpose().matvec(&dbeta)?;
            let dy = Matrix::from_fn(d, t, |i, j| {
                let direct = hz.get(i, j) / sbeta[i];
                let through_b = if b[i] > 0.0 {
                    let y_ij = z.get(i, j) * sbeta[i];
                    db[i] * y_ij / (t as f64 * b[i])
                } else {
                    0.0
                };
                direct + through_b
            });

            // Shift stage.
            let dalpha: Vec<f64> = (0..d).map(|i| -dy.row(i).iter().sum::<f64>()).collect();
            grads.wa.add_assign(&outer(&dalpha, &cache.a[s]))?;
            let da = self.wa.transpose().matvec(&dalpha)?;
            grad_in.push(Matrix::from_fn(d, t, |i, j| {
                dy.get(i, j) + da[i] / t as f64
            }));
        }
        Ok((grad_in, grads))
    }

    pub fn slots(&self) -> Vec<Slot<'_>> {
        vec![
            Slot::matrix("wa", &self.wa).weight(),
            Slot::matrix("wb", &self.wb).weight(),
            Slot::matrix("wc", &self.wc).weight(),
            Slot::vector("wd", &self.wd),
        ]
    }

    pub fn slots_mut(&mut self) -> Vec<SlotMut<'_>> {
        vec![
            SlotMut::matrix("wa", &mut self.wa).weight(),
            SlotMut::matrix("wb", &mut self.wb).weight(),
            SlotMut::matrix("wc", &mut self.wc).weight(),
            SlotMut::vector("wd", &mut self.wd),
        ]
    }
}

impl DainGrads {
    pub fn slots(&self) -> Vec<GradSlot<'_>> {
        vec![
            GradSlot::matrix("wa", &self.wa),
            GradSlot::matrix("wb", &self.wb),
            GradSlot::matrix("wc", &self.wc),
            GradSlot::vector("wd", &self.wd),
        ]
    }
}
