//! Contextual hypernetwork that generates decoder heads for new features.

mod model;
mod train;

pub use model::{Chn, ChnConfig, ChnParams, ContextPoint, HeadTrace};
pub use train::{chn_head, meta_loss, meta_train, MetaLoss, MetaTrainConfig};
