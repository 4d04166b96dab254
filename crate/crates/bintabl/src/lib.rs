//! Bilinear normalization and temporal-attention bilinear networks for
//! limit-order-book time-series classification.
//!
//! The crate implements, from scratch in f64 with analytic gradients:
//!
//! - `norm` — input normalization layers: BiN (per-sample standardization
//!   along both tensor modes with a learned non-negative combination),
//!   DAIN, and input-level batch normalization;
//! - `layers` — bilinear and temporal-attention bilinear (TABL) layers and
//!   the B/C network topologies over 40×10 order-book windows;
//! - `train` — weighted cross-entropy, Adam with decay or max-norm weight
//!   regularization, the step schedule, and the median-of-runs protocol;
//! - `data` — FI-2010-format text loading, window/label construction, and
//!   a synthetic regime-shift generator for desk-scale benchmarks;
//! - `metrics` — confusion-matrix accuracy / macro precision / recall / F1
//!   and the machine-readable evaluation report;
//! - `gradcheck` — central finite-difference verification of every
//!   backward pass;
//! - `checkpoint` — bit-exact JSON model containers.
//!
//! Everything is deterministic given a seed: the RNG is the crate's own
//! SplitMix64, products use a fixed accumulation order, and reports render
//! floats in shortest round-trip form.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod metrics;
pub mod norm;
pub mod params;
pub mod rng;
pub mod train;

pub use error::{Category, Error, Result};
pub use layers::network::{build_network, Arch, Network, NormKind};
pub use matrix::Matrix;
pub use rng::Rng;
pub use train::TrainConfig;
