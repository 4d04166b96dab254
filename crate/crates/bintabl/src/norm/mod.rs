//! Input normalization layers: BiN, DAIN and input-level batch
//! normalization, each with forward and analytic backward passes.

pub mod batchnorm;
pub mod bin;
pub mod dain;

pub use batchnorm::{BatchNormParams, BnCache, BnGrads};
pub use bin::{BinCache, BinGrads, BinParams};
pub use dain::{DainCache, DainGrads, DainParams};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::params::{GradSlot, Slot, SlotMut};

#[derive(Clone, Debug)]
pub enum Normalizer {
    None,
    Bin(BinParams),
    Dain(DainParams),
    BatchNorm(BatchNormParams),
}

#[derive(Clone, Debug)]
pub enum NormCache {
    None,
    Bin(BinCache),
    Dain(DainCache),
    BatchNorm(BnCache),
}

#[derive(Clone, Debug)]
pub enum NormGrads {
    None,
    Bin(BinGrads),
    Dain(DainGrads),
    BatchNorm(BnGrads),
}

impl Normalizer {
    pub fn forward(&mut self, xs: &[Matrix], training: bool) -> Result<(Vec<Matrix>, NormCache)> {
        match self {
            Normalizer::None => Ok((xs.to_vec(), NormCache::None)),
            Normalizer::Bin(p) => {
                let (out, cache) = p.forward(xs)?;
                Ok((out, NormCache::Bin(cache)))
            }
            Normalizer::Dain(p) => {
                let (out, cache) = p.forward(xs)?;
                Ok((out, NormCache::Dain(cache)))
            }
            Normalizer::BatchNorm(p) => {
                let (out, cache) = p.forward(xs, training)?;
                Ok((out, NormCache::BatchNorm(cache)))
            }
        }
    }

    pub fn backward(
        &self,
        grad_out: &[Matrix],
        cache: &NormCache,
    ) -> Result<(Vec<Matrix>, NormGrads)> {
        match (self, cache) {
            (Normalizer::None, NormCache::None) => Ok((grad_out.to_vec(), NormGrads::None)),
            (Normalizer::Bin(p), NormCache::Bin(c)) => {
                let (gi, g) = p.backward(grad_out, c)?;
                Ok((gi, NormGrads::Bin(g)))
            }
            (Normalizer::Dain(p), NormCache::Dain(c)) => {
                let (gi, g) = p.backward(grad_out, c)?;
                Ok((gi, NormGrads::Dain(g)))
            }
            (Normalizer::BatchNorm(p), NormCache::BatchNorm(c)) => {
                let (gi, g) = p.backward(grad_out, c)?;
                Ok((gi, NormGrads::BatchNorm(g)))
            }
            _ => Err(crate::error::Error::contract(
                "normalizer backward: cache kind does not match the normalizer".to_string(),
            )),
        }
    }

    /// Post-step constraint hook (the non-negativity projection of the BiN
    /// combination weights).
    pub fn enforce_constraints(&mut self) {
        if let Normalizer::Bin(p) = self {
            p.clamp_lambdas();
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Normalizer::None => 0,
            Normalizer::Bin(p) => p.param_count(),
            Normalizer::Dain(p) => p.param_count(),
            Normalizer::BatchNorm(p) => p.param_count(),
        }
    }

    pub fn slots(&self) -> Vec<Slot<'_>> {
        match self {
            Normalizer::None => Vec::new(),
            Normalizer::Bin(p) => p.slots(),
            Normalizer::Dain(p) => p.slots(),
            Normalizer::BatchNorm(p) => p.slots(),
        }
    }

    pub fn slots_mut(&mut self) -> Vec<SlotMut<'_>> {
        match self {
            Normalizer::None => Vec::new(),
            Normalizer::Bin(p) => p.slots_mut(),
            Normalizer::Dain(p) => p.slots_mut(),
            Normalizer::BatchNorm(p) => p.slots_mut(),
        }
    }
}

impl NormGrads {
    pub fn slots(&self) -> Vec<GradSlot<'_>> {
        match self {
            NormGrads::None => Vec::new(),
            NormGrads::Bin(g) => g.slots(),
            NormGrads::Dain(g) => g.slots(),
            NormGrads::BatchNorm(g) => g.slots(),
        }
    }
}
