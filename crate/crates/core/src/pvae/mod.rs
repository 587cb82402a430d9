//! Partial VAE base model with per-feature decoder heads.

mod cache;
mod head;
mod model;
mod train;
mod view;

pub use cache::BaseCache;
pub use head::{HeadParams, Link};
pub use model::{EncodeTrace, PvaeConfig, PvaeModel, PvaeParams};
pub use train::{elbo, train_base, BaseTrainConfig, ElboEstimate};
pub use view::BaseView;
