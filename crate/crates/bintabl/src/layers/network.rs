//! Network topologies: an optional input normalizer, a chain of layers,
//! inverted dropout after hidden layers, and a softmax head over 3 classes.
//!
//! Topology B: 40×10 → bilinear 120×5 (relu) → TABL 3×1.
//! Topology C: 40×10 → bilinear 60×10 (relu) → bilinear 120×5 (relu) → TABL 3×1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::norm::{BatchNormParams, BinParams, DainParams, NormCache, NormGrads, Normalizer};
use crate::params::{GradSlot, Slot, SlotMut};
use crate::rng::Rng;

use super::bilinear::{Activation, BilinearCache, BilinearGrads, BilinearLayer};
use super::tabl::{TablCache, TablGrads, TablLayer};

pub const INPUT_FEATURES: usize = 40;
pub const INPUT_STEPS: usize = 10;
pub const CLASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    B,
    C,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    None,
    Bin,
    Dain,
    BatchNorm,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arch::B => write!(f, "B"),
            Arch::C => write!(f, "C"),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormKind::None => write!(f, "none"),
            NormKind::Bin => write!(f, "bin"),
            NormKind::Dain => write!(f, "dain"),
            NormKind::BatchNorm => write!(f, "bn"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Layer {
    Bilinear(BilinearLayer),
    Tabl(TablLayer),
}

impl Layer {
    fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerCache)> {
        match self {
            Layer::Bilinear(l) => {
                let (y, c) = l.forward(x)?;
                Ok((y, LayerCache::Bilinear(c)))
            }
            Layer::Tabl(l) => {
                let (y, c) = l.forward(x)?;
                Ok((y, LayerCache::Tabl(c)))
            }
        }
    }

    fn backward(&self, g: &Matrix, cache: &LayerCache) -> Result<(Matrix, LayerGrads)> {
        match (self, cache) {
            (Layer::Bilinear(l), LayerCache::Bilinear(c)) => {
                let (gi, gr) = l.backward(g, c)?;
                Ok((gi, LayerGrads::Bilinear(gr)))
            }
            (Layer::Tabl(l), LayerCache::Tabl(c)) => {
                let (gi, gr) = l.backward(g, c)?;
                Ok((gi, LayerGrads::Tabl(gr)))
            }
            _ => Err(Error::contract(
                "layer backward: cache kind does not match the layer".to_string(),
            )),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Bilinear(l) => l.param_count(),
            Layer::Tabl(l) => l.param_count(),
        }
    }

    fn slots(&self) -> Vec<Slot<'_>> {
        match self {
            Layer::Bilinear(l) => l.slots(),
            Layer::Tabl(l) => l.slots(),
        }
    }

    fn slots_mut(&mut self) -> Vec<SlotMut<'_>> {
        match self {
            Layer::Bilinear(l) => l.slots_mut(),
            Layer::Tabl(l) => l.slots_mut(),
        }
    }
}

#[derive(Clone, Debug)]
enum LayerCache {
    Bilinear(BilinearCache),
    Tabl(TablCache),
}

#[derive(Clone, Debug)]
pub enum LayerGrads {
    Bilinear(BilinearGrads),
    Tabl(TablGrads),
}

impl LayerGrads {
    fn slots(&self) -> Vec<GradSlot<'_>> {
        match self {
            LayerGrads::Bilinear(g) => g.slots(),
            LayerGrads::Tabl(g) => g.slots(),
        }
    }

    fn accumulate(&mut self, other: &LayerGrads) -> Result<()> {
        match (self, other) {
            (LayerGrads::Bilinear(a), LayerGrads::Bilinear(b)) => {
                a.w1.add_assign(&b.w1)?;
                a.w2.add_assign(&b.w2)?;
                a.bias.add_assign(&b.bias)?;
            }
            (LayerGrads::Tabl(a), LayerGrads::Tabl(b)) => {
                a.w1.add_assign(&b.w1)?;
                a.w.add_assign(&b.w)?;
                a.w2.add_assign(&b.w2)?;
                a.lambda += b.lambda;
                a.bias.add_assign(&b.bias)?;
            }
            _ => return Err(Error::contract("layer gradient kinds differ".to_string())),
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    pub normalizer: Normalizer,
    pub layers: Vec<Layer>,
    /// Rate of entries dropped after each hidden layer during training.
    pub dropout: f64,
}

/// Everything backward needs from one training-mode forward pass.
pub struct ForwardCache {
    norm: NormCache,
    layer_caches: Vec<Vec<LayerCache>>,
    /// Per sample, per hidden layer: inverted-dropout mask (None when off).
    dropout_masks: Vec<Vec<Option<Matrix>>>,
    batch_size: usize,
}

#[derive(Debug)]
pub struct NetworkGrads {
    pub norm: NormGrads,
    pub layers: Vec<LayerGrads>,
}

impl NetworkGrads {
    /// Aligned, by construction, with the trainable slots of the network
    /// that produced them.
    pub fn slots(&self) -> Vec<GradSlot<'_>> {
        let mut out = Vec::new();
        for s in self.norm.slots() {
            out.push(s.prefixed("norm"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            for s in l.slots() {
                out.push(s.prefixed(&format!("layer{i}")));
            }
        }
        out
    }
}

/// What to build: the topology, the input normalizer, and the BiN
/// feature-divisor variant.
#[derive(Clone, Copy, Debug)]
pub struct ModelSpec {
    pub arch: Arch,
    pub norm: NormKind,
    pub bin_literal_divisor: bool,
}

impl ModelSpec {
    pub fn new(arch: Arch, norm: NormKind) -> Self {
        ModelSpec {
            arch,
            norm,
            bin_literal_divisor: false,
        }
    }

    pub fn build(&self, rng: &mut Rng) -> Network {
        let mut net = build_network(self.arch, self.norm, rng);
        if let Normalizer::Bin(p) = &mut net.normalizer {
            p.literal_feature_divisor = self.bin_literal_divisor;
        }
        net
    }
}

pub fn build_network(arch: Arch, norm: NormKind, rng: &mut Rng) -> Network {
    let normalizer = match norm {
        NormKind::None => Normalizer::None,
        NormKind::Bin => Normalizer::Bin(BinParams::new(INPUT_FEATURES, INPUT_STEPS)),
        NormKind::Dain => Normalizer::Dain(DainParams::new(INPUT_FEATURES)),
        NormKind::BatchNorm => Normalizer::BatchNorm(BatchNormParams::new(
            INPUT_FEATURES,
            INPUT_STEPS,
        )),
    };
    let layers = match arch {
        Arch::B => vec![
            Layer::Bilinear(BilinearLayer::new(
                rng,
                INPUT_FEATURES,
                INPUT_STEPS,
                120,
                5,
                Activation::Relu,
            )),
            Layer::Tabl(TablLayer::new(rng, 120, 5, CLASSES, 1)),
        ],
        Arch::C => vec![
            Layer::Bilinear(BilinearLayer::new(
                rng,
                INPUT_FEATURES,
                INPUT_STEPS,
                60,
                10,
                Activation::Relu,
            )),
            Layer::Bilinear(BilinearLayer::new(rng, 60, 10, 120, 5, Activation::Relu)),
            Layer::Tabl(TablLayer::new(rng, 120, 5, CLASSES, 1)),
        ],
    };
    Network {
        normalizer,
        layers,
        dropout: 0.1,
    }
}

impl Network {
    pub fn count_params(&self) -> usize {
        self.normalizer.param_count()
            + self.layers.iter().map(|l| l.param_count()).sum::<usize>()
    }

    /// Training-mode forward: batch-norm consumes batch statistics, dropout
    /// masks are drawn from `rng`. Returns per-sample class probabilities
    /// and the cache backward needs.
    pub fn forward_train(
        &mut self,
        xs: &[Matrix],
        rng: &mut Rng,
    ) -> Result<(Vec<[f64; CLASSES]>, ForwardCache)> {
        let (normalized, norm_cache) = self.normalizer.forward(xs, true)?;
        let keep = 1.0 - self.dropout;
        let last = self.layers.len() - 1;

        let mut probs = Vec::with_capacity(xs.len());
        let mut layer_caches = Vec::with_capacity(xs.len());
        let mut dropout_masks = Vec::with_capacity(xs.len());
        for h0 in &normalized {
            let mut h = h0.clone();
            let mut caches = Vec::with_capacity(self.layers.len());
            let mut masks = Vec::with_capacity(self.layers.len());
            for (li, layer) in self.layers.iter().enumerate() {
                let (y, cache) = layer.forward(&h)?;
                caches.push(cache);
                h = y;
                if li < last && self.dropout > 0.0 {
                    let mask = Matrix::from_fn(h.rows(), h.cols(), |_, _| {
                        if rng.next_f64() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    h = h.hadamard(&mask)?;
                    masks.push(Some(mask));
                } else {
                    masks.push(None);
                }
            }
            probs.push(softmax3(&logits_of(&h)?));
            layer_caches.push(caches);
            dropout_masks.push(masks);
        }
        Ok((
            probs,
            ForwardCache {
                norm: norm_cache,
                layer_caches,
                dropout_masks,
                batch_size: xs.len(),
            },
        ))
    }

    /// Inference-mode forward: running statistics, no dropout, no state
    /// change. Deterministic.
    pub fn forward_eval(&self, xs: &[Matrix]) -> Result<Vec<[f64; CLASSES]>> {
        // Batch norm in eval mode reads but never writes its buffers.
        let (normalized, _) = match &self.normalizer {
            Normalizer::None => (xs.to_vec(), NormCache::None),
            Normalizer::Bin(p) => {
                let (o, c) = p.forward(xs)?;
                (o, NormCache::Bin(c))
            }
            Normalizer::Dain(p) => {
                let (o, c) = p.forward(xs)?;
                (o, NormCache::Dain(c))
            }
            Normalizer::BatchNorm(p) => {
                let mut p = p.clone();
                let (o, c) = p.forward(xs, false)?;
                (o, NormCache::BatchNorm(c))
            }
        };
        let mut probs = Vec::with_capacity(xs.len());
        for h0 in &normalized {
            let mut h = h0.clone();
            for layer in &self.layers {
                let (y, _) = layer.forward(&h)?;
                h = y;
            }
            probs.push(softmax3(&logits_of(&h)?));
        }
        Ok(probs)
    }

    /// Backward from per-sample logit gradients. Returns the gradient with
    /// respect to the raw inputs alongside all parameter gradients.
    pub fn backward(
        &self,
        grad_logits: &[[f64; CLASSES]],
        cache: &ForwardCache,
    ) -> Result<(Vec<Matrix>, NetworkGrads)> {
        if grad_logits.len() != cache.batch_size {
            return Err(Error::contract(format!(
                "network backward: cache holds {} samples, gradient holds {}",
                cache.batch_size,
                grad_logits.len()
            )));
        }
        let mut layer_grads: Vec<Option<LayerGrads>> = (0..self.layers.len()).map(|_| None).collect();
        let mut grad_normalized = Vec::with_capacity(cache.batch_size);

        for (s, gl) in grad_logits.iter().enumerate() {
            let mut g = Matrix::from_vec(CLASSES, 1, gl.to_vec())?;
            for li in (0..self.layers.len()).rev() {
                if let Some(mask) = &cache.dropout_masks[s][li] {
                    g = g.hadamard(mask)?;
                }
                let (gi, gr) = self.layers[li].backward(&g, &cache.layer_caches[s][li])?;
                match &mut layer_grads[li] {
                    Some(acc) => acc.accumulate(&gr)?,
                    slot => *slot = Some(gr),
                }
                g = gi;
            }
            grad_normalized.push(g);
        }

        let (grad_in, norm_grads) = self.normalizer.backward(&grad_normalized, &cache.norm)?;
        Ok((
            grad_in,
            NetworkGrads {
                norm: norm_grads,
                layers: layer_grads.into_iter().map(|g| g.unwrap()).collect(),
            },
        ))
    }

    /// Distance of the closest relu pre-activation to its kink over one
    /// training-mode pass. The finite-difference harness rejects instances
    /// where this is within reach of the probe step.
    pub(crate) fn min_relu_margin(&mut self, xs: &[Matrix]) -> Result<f64> {
        let mut rng = Rng::new(0); // dropout is expected to be off
        let (_, cache) = self.forward_train(xs, &mut rng)?;
        let mut margin = f64::INFINITY;
        for sample in &cache.layer_caches {
            for lc in sample {
                if let LayerCache::Bilinear(c) = lc {
                    margin = margin.min(c.min_abs_pre());
                }
            }
        }
        Ok(margin)
    }

    /// Post-step hooks: BiN λ ≥ 0, TABL λ ∈ [0, 1], diag(W) = 1/T.
    pub fn enforce_constraints(&mut self) {
        self.normalizer.enforce_constraints();
        for layer in &mut self.layers {
            if let Layer::Tabl(t) = layer {
                t.enforce_constraints();
            }
        }
    }

    /// Every stored tensor, prefixed by component. Buffers (batch-norm
    /// running statistics) are included with `trainable == false`.
    pub fn slots(&self) -> Vec<Slot<'_>> {
        let mut out = Vec::new();
        for s in self.normalizer.slots() {
            out.push(s.prefixed("norm"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            for s in layer.slots() {
                out.push(s.prefixed(&format!("layer{i}")));
            }
        }
        out
    }

    pub fn slots_mut(&mut self) -> Vec<SlotMut<'_>> {
        let mut out = Vec::new();
        for s in self.normalizer.slots_mut() {
            out.push(s.prefixed("norm"));
        }
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for s in layer.slots_mut() {
                out.push(s.prefixed(&format!("layer{i}")));
            }
        }
        out
    }
}

fn logits_of(h: &Matrix) -> Result<[f64; CLASSES]> {
    if h.shape() != (CLASSES, 1) {
        return Err(Error::shape("logits", h.shape(), (CLASSES, 1)));
    }
    Ok([h.get(0, 0), h.get(1, 0), h.get(2, 0)])
}

pub fn softmax3(logits: &[f64; CLASSES]) -> [f64; CLASSES] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = [
        (logits[0] - max).exp(),
        (logits[1] - max).exp(),
        (logits[2] - max).exp(),
    ];
    let sum: f64 = exps.iter().sum();
    [exps[0] / sum, exps[1] / sum, exps[2] / sum]
}
