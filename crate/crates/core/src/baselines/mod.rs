//! Head-initialisation baselines sharing the hypernetwork's output type.

mod bank;
mod finetune;
mod maml;

pub use bank::{
    euclidean, impute, knn_head, mean_head, mean_head_matching, mean_impute_head, random_head,
    HeadBank, ImputedColumns, MEAN_CLAMP,
};
pub use finetune::{context_trunks, fit_head, head_nll, train_from_random};
pub use maml::{maml_adapt, maml_meta_train, MamlConfig, MamlInit};
