//! Bilinear and temporal-attention bilinear layers plus the network
//! topologies built from them.

pub mod bilinear;
pub mod network;
pub mod tabl;

pub use bilinear::{Activation, BilinearCache, BilinearGrads, BilinearLayer};
pub use network::{build_network, Arch, ForwardCache, Network, NetworkGrads, NormKind};
pub use tabl::{TablCache, TablGrads, TablLayer};
