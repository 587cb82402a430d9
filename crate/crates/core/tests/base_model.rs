use chn_core::data::{generate_synthetic, SparseDataset, SynthConfig, Triplet};
use chn_core::harness::{base_stage, make_split, RunConfig};
use chn_core::numerics::Rng;

const BENCHMARK: &str = include_str!("../../../configs/benchmark.conf");

/// Held-out RMSE of the base model and of column-mean imputation, over a
/// tenth of the observed train-feature cells.
fn imputation_rmse(full: &SparseDataset, cfg: &RunConfig, seed: u64) -> (f64, f64) {
    let split = make_split(full, None, cfg, seed).unwrap();
    let train_mask = split.train_mask();
    let mut rng = Rng::new(seed).derive("holdout");
    let (mut kept, mut held) = (Vec::new(), Vec::new());
    for t in full.triplets() {
        if train_mask[t.feature] && rng.uniform() < 0.1 {
            held.push(*t);
        } else {
            kept.push(*t);
        }
    }
    let kinds = full.kinds().to_vec();
    let data = SparseDataset::new(full.n_rows(), kinds, kept).unwrap();
    let (model, _) = base_stage(&data, &split, cfg, seed).unwrap();

    let (mut model_sse, mut mean_sse) = (0.0, 0.0);
    for &Triplet { row, feature, value } in &held {
        let observed = data.row_restricted(row, &train_mask);
        let head = model.head(feature).unwrap();
        let pred = model.predict_feature(head, &observed).unwrap();
        let col = data.mean_over(&[feature]).unwrap_or(0.5);
        model_sse += (pred - value).powi(2);
        mean_sse += (col - value).powi(2);
    }
    let n = held.len() as f64;
    ((model_sse / n).sqrt(), (mean_sse / n).sqrt())
}

#[test]
fn base_model_beats_column_means_on_held_out_cells() {
    let mut cfg = RunConfig::default();
    cfg.apply_text(BENCHMARK).unwrap();
    let synth = SynthConfig { obs_prob: 0.3, ..SynthConfig::default() };
    let data = generate_synthetic(&synth, &Rng::new(0)).unwrap();
    let mut wins = 0;
    let mut report = Vec::new();
    for &seed in &cfg.seeds {
        let (model, mean) = imputation_rmse(&data.dataset, &cfg, seed);
        report.push(format!("{model:.4}/{mean:.4}"));
        wins += usize::from(model < mean);
    }
    assert!(wins >= 4, "model/mean rmse per seed: {report:?}");
}
