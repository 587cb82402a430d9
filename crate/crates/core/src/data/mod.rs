//! Sparse, partially observed data and everything that samples from it.

mod dataset;
mod episode;
mod io;
mod mask;
mod metadata;
mod split;
mod synth;

pub use dataset::{FeatureKind, Scale, SparseDataset, Triplet};
pub use episode::{sample_context_size, sample_episode, Episode, MAX_CONTEXT_SIZE};
pub use io::{
    load_data_dir, load_metadata, load_triplets, read_factors, read_vocab, save_data_dir,
    write_factors, write_metadata, write_triplets, KindSpec, DataDir,
};
pub use mask::{bernoulli_mask, MaskedRow};
pub use metadata::{FeatureMeta, MetadataTable};
pub use split::{split_features, FeatureRole, FeatureSplit, SplitFractions, SplitMode};
pub use synth::{generate_synthetic, tag_groups, SynthConfig, SyntheticData};
