//! Contextual hypernetworks for few-shot adaptation to newly added features.
//!
//! A frozen partial VAE (`pvae`) imputes sparse data through per-feature decoder
//! heads. When a new feature arrives with a handful of observations, a
//! hypernetwork (`chn`) maps those observations and the feature's metadata to a
//! fresh decoder head in one forward pass. `baselines` provides the competing
//! head initialisers and `harness` runs the k-shot evaluation and timing
//! protocols over all of them.

pub mod baselines;
pub mod chn;
pub mod data;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod pvae;

pub use error::{Error, Result};
