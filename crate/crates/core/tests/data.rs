mod common;

use std::collections::BTreeSet;

use chn_core::data::{
    generate_synthetic, load_data_dir, read_factors, sample_episode, save_data_dir, split_features, write_factors,
    DataDir, FeatureKind, KindSpec, SparseDataset, SplitFractions, SplitMode, SynthConfig, Triplet,
};
use chn_core::numerics::Rng;
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = SparseDataset> {
    (1usize..30, 1usize..8).prop_flat_map(|(rows, features)| {
        prop::collection::vec(prop::option::of(any::<bool>()), rows * features).prop_map(move |cells| {
            let triplets = cells
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    c.map(|v| Triplet { row: i / features, feature: i % features, value: f64::from(u8::from(v)) })
                })
                .collect();
            SparseDataset::new(rows, vec![FeatureKind::Binary; features], triplets).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn episodes_partition_the_observations(ds in dataset(), k in 0usize..40, seed in any::<u64>()) {
        for f in (0..ds.n_features()).filter(|&f| ds.observed_count(f) > 0) {
            let ep = sample_episode(&ds, f, k, &mut Rng::new(seed)).unwrap();
            let obs = ds.feature_observations(f);
            prop_assert_eq!(ep.k, k.min(obs.len()));
            prop_assert_eq!(ep.context.len(), ep.k);
            let mut joined: Vec<_> = ep.context.iter().chain(&ep.target).copied().collect();
            joined.sort_by_key(|o| o.0);
            prop_assert_eq!(&joined[..], obs);
            let again = sample_episode(&ds, f, k, &mut Rng::new(seed)).unwrap();
            prop_assert_eq!(ep.context_hash(), again.context_hash());
        }
    }

    #[test]
    fn splits_partition_and_repeat(n in 3usize..200, seed in any::<u64>(), a in 0.1f64..0.8, b in 0.05f64..0.5) {
        prop_assume!(a + b < 0.95);
        let fractions = SplitFractions::new(a, b, 1.0 - a - b).unwrap();
        let result = split_features(n, fractions, SplitMode::Random(&mut Rng::new(seed)));
        let size = |f: f64| (n as f64 * f + 1e-9).floor() as usize;
        if size(b) == 0 || size(1.0 - a - b) == 0 {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let one = result.unwrap();
        let two = split_features(n, fractions, SplitMode::Random(&mut Rng::new(seed))).unwrap();
        prop_assert_eq!(&one, &two);
        let all: BTreeSet<usize> = one.train.iter().chain(&one.meta_train).chain(&one.meta_test).copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(one.train.len() + one.meta_train.len() + one.meta_test.len(), n);
        prop_assert!(one.train.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn benchmark_split_sizes() {
    let split = split_features(60, SplitFractions::default(), SplitMode::Random(&mut Rng::new(1))).unwrap();
    assert_eq!((split.train.len(), split.meta_train.len(), split.meta_test.len()), (36, 18, 6));
}

#[test]
fn synthetic_data_is_reproducible() {
    let a = generate_synthetic(&SynthConfig::default(), &Rng::new(11)).unwrap();
    let b = generate_synthetic(&SynthConfig::default(), &Rng::new(11)).unwrap();
    let c = generate_synthetic(&SynthConfig::default(), &Rng::new(12)).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.metadata, b.metadata);
    assert_eq!(a.row_factors, b.row_factors);
    assert_ne!(a.dataset, c.dataset);
    assert_eq!(a.dataset.n_rows(), 500);
    assert_eq!(a.dataset.n_features(), 60);
    assert_eq!(a.metadata.vocab().len(), 4);
}

#[test]
fn data_directory_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    for kind in [FeatureKind::Binary, FeatureKind::Continuous] {
        let synth = common::small_data(kind, 3);
        let dir = DataDir::new(tmp.path().join(kind.to_string()));
        save_data_dir(&dir, &synth.dataset, Some(&synth.metadata)).unwrap();
        write_factors(dir.feature_factors(), &synth.feature_factors).unwrap();
        let (ds, meta) = load_data_dir(&dir, &KindSpec::all(FeatureKind::Binary)).unwrap();
        assert_eq!(ds.kinds(), synth.dataset.kinds());
        assert_eq!(ds.n_rows(), synth.dataset.n_rows());
        assert_eq!(ds.triplets().len(), synth.dataset.triplets().len());
        for (x, y) in ds.triplets().iter().zip(synth.dataset.triplets()) {
            assert_eq!((x.row, x.feature), (y.row, y.feature));
            assert!((x.value - y.value).abs() < 1e-12);
        }
        assert_eq!(meta.unwrap(), synth.metadata);
        assert_eq!(read_factors(dir.feature_factors()).unwrap(), synth.feature_factors);
    }
}
