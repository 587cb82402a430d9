#![allow(dead_code)]

use chn_core::data::{generate_synthetic, FeatureKind, SynthConfig, SyntheticData};
use chn_core::harness::{train_seed, RunConfig, SeedRun};
use chn_core::numerics::Rng;

/// Small synthetic problem that trains in well under a second.
pub fn small_data(kind: FeatureKind, seed: u64) -> SyntheticData {
    let cfg = SynthConfig {
        n_rows: 80,
        n_features: 20,
        rank: 2,
        noise_sd: 0.1,
        obs_prob: 0.4,
        kind,
        n_tag_groups: 3,
    };
    generate_synthetic(&cfg, &Rng::new(seed)).expect("synthetic data")
}

pub fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.apply_text(
        "seeds = 1,2
         ks = 0,2,8
         embedding_dim = 4
         set_dim = 6
         latent_dim = 2
         encoder_hidden = 8
         decoder_layers = 8
         base_epochs = 15
         base_batch_size = 20
         chn_point_dim = 4
         chn_point_hidden = 6
         chn_context_dim = 4
         chn_context_hidden = 6
         chn_meta_dim = 2
         chn_meta_hidden = 3
         chn_pred_hidden = 8
         meta_epochs = 10
         meta_batch_size = 4
         maml_epochs = 5
         timing_repetitions = 2
         timing_batch_size = 8",
    )
    .expect("small config parses");
    cfg
}

pub fn small_run(data: &SyntheticData, cfg: &RunConfig, seed: u64) -> SeedRun {
    train_seed(&data.dataset, Some(&data.metadata), cfg, seed, true, true).expect("training")
}
