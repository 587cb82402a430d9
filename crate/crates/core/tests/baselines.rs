mod common;

use std::collections::BTreeMap;

use chn_core::baselines::{
    context_trunks, fit_head, knn_head, maml_adapt, maml_meta_train, mean_head, mean_head_matching, random_head,
    HeadBank, ImputedColumns, MamlConfig,
};
use chn_core::data::{sample_episode, FeatureKind, SparseDataset, Triplet};
use chn_core::harness::seed_rng;
use chn_core::numerics::Rng;
use chn_core::pvae::{HeadParams, Link};
use proptest::prelude::*;

fn heads(n: usize, d: usize, rng: &mut Rng) -> BTreeMap<usize, HeadParams> {
    (0..n)
        .map(|f| (f, HeadParams { w: (0..d).map(|_| rng.normal()).collect(), b: rng.normal(), link: Link::Sigmoid }))
        .collect()
}

fn column_data(cells: &[Option<bool>], rows: usize, features: usize) -> SparseDataset {
    let triplets = cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|v| Triplet { row: i % rows, feature: i / rows, value: f64::from(u8::from(v)) }))
        .collect();
    SparseDataset::new(rows, vec![FeatureKind::Binary; features], triplets).unwrap()
}

proptest! {
    #[test]
    fn knn_saturates_to_the_mean_head(
        cells in prop::collection::vec(prop::option::of(any::<bool>()), 6 * 5),
        seed in any::<u64>(),
        extra in 0usize..4,
    ) {
        let data = column_data(&cells, 6, 5);
        let bank = HeadBank::new(heads(4, 3, &mut Rng::new(seed)), BTreeMap::new()).unwrap();
        let columns = ImputedColumns::new(&data, bank.features());
        let context = data.feature_observations(4).to_vec();
        let got = knn_head(&bank, &columns, &context, 4 + extra, 0.5, Link::Sigmoid).unwrap();
        prop_assert_eq!(got, mean_head(&bank, Link::Sigmoid).unwrap());
    }

    #[test]
    fn knn_with_a_copied_column_returns_its_head(
        cells in prop::collection::vec(prop::option::of(any::<bool>()), 8 * 4),
        seed in any::<u64>(),
        pick in 0usize..4,
    ) {
        let data = column_data(&cells, 8, 4);
        prop_assume!(data.observed_count(pick) > 0);
        let distinct = (0..4).filter(|&f| f != pick).all(|f| {
            let a = ImputedColumns::new(&data, [f, pick]);
            a.column(f) != a.column(pick)
        });
        prop_assume!(distinct);
        let bank = HeadBank::new(heads(4, 2, &mut Rng::new(seed)), BTreeMap::new()).unwrap();
        let columns = ImputedColumns::new(&data, bank.features());
        let context = data.feature_observations(pick).to_vec();
        let got = knn_head(&bank, &columns, &context, 1, 0.5, Link::Sigmoid).unwrap();
        prop_assert_eq!(&got, bank.head(pick).unwrap());
    }
}

#[test]
fn matching_average_uses_exactly_the_matching_heads() {
    let mut rng = Rng::new(4);
    let hs = heads(5, 2, &mut rng);
    let tags: BTreeMap<usize, Vec<bool>> =
        (0..5).map(|f| (f, vec![f == 1 || f == 3, f == 4])).collect();
    let bank = HeadBank::new(hs.clone(), tags).unwrap();
    let got = mean_head_matching(&bank, &[true, false], Link::Sigmoid).unwrap();
    let want_w: Vec<f64> = (0..2).map(|i| (hs[&1].w[i] + hs[&3].w[i]) / 2.0).collect();
    assert_eq!(got.w, want_w);
    assert_eq!(got.b, (hs[&1].b + hs[&3].b) / 2.0);
    let none = mean_head_matching(&bank, &[true, true], Link::Sigmoid).unwrap();
    assert_eq!(none, mean_head(&bank, Link::Sigmoid).unwrap());
}

#[test]
fn train_from_random_reduces_context_loss_on_most_seeds() {
    let cfg = common::small_config();
    let mut improved = 0;
    for seed in 1..=5u64 {
        let data = common::small_data(FeatureKind::Binary, seed);
        let run = common::small_run(&data, &cfg, seed);
        let view = run.view(&data.dataset).unwrap();
        let f = run.split.meta_test[0];
        let ep = sample_episode(&data.dataset, f, 8, &mut Rng::new(seed)).unwrap();
        let points = context_trunks(&view, f, &ep.context).unwrap();
        let init = random_head(run.base.d_dim(), Link::Sigmoid, &mut Rng::new(seed)).unwrap();
        let (_, losses) = fit_head(&init, &points, 0.1, 10, 1e-2).unwrap();
        improved += usize::from(losses[10] <= losses[0]);
    }
    assert!(improved >= 4, "{improved}/5");
}

/// Every feature is mostly ones, so a shared bias is worth learning.
fn skewed_data(seed: u64) -> SparseDataset {
    let mut rng = Rng::new(seed);
    let (rows, features) = (80, 20);
    let mut triplets = Vec::new();
    for i in 0..rows * features {
        if rng.uniform() < 0.5 {
            let value = f64::from(u8::from(rng.uniform() < 0.9));
            triplets.push(Triplet { row: i % rows, feature: i / rows, value });
        }
    }
    SparseDataset::new(rows, vec![FeatureKind::Binary; features], triplets).unwrap()
}

#[test]
fn maml_without_inner_steps_descends_on_target_loss() {
    let mut cfg = common::small_config();
    cfg.maml = MamlConfig { inner_steps: 0, epochs: 20, ..MamlConfig::default() };
    let mut decreased = 0;
    for seed in 1..=5u64 {
        let data = skewed_data(seed);
        let run = chn_core::harness::train_seed(&data, None, &cfg, seed, false, false).unwrap();
        let view = run.view(&data).unwrap();
        let (_, trace) = maml_meta_train(&view, &run.split, &cfg.maml, &seed_rng(seed).derive("maml")).unwrap();
        assert_eq!(trace.len(), cfg.maml.epochs + 1);
        decreased += usize::from(trace[trace.len() - 1] < trace[0]);
    }
    assert!(decreased >= 4, "{decreased}/5");
}

#[test]
fn maml_edge_cases() {
    let cfg = common::small_config();
    let data = common::small_data(FeatureKind::Continuous, 9);
    let run = common::small_run(&data, &cfg, 9);
    let view = run.view(&data.dataset).unwrap();
    let rng = Rng::new(1);

    // A zero inner rate leaves every adapted head at the initialisation, so
    // the result matches training with no inner steps at all.
    let frozen_inner = MamlConfig { inner_lr: 0.0, epochs: 3, ..MamlConfig::default() };
    let no_inner = MamlConfig { inner_steps: 0, ..frozen_inner.clone() };
    let a = maml_meta_train(&view, &run.split, &frozen_inner, &rng).unwrap();
    let b = maml_meta_train(&view, &run.split, &no_inner, &rng).unwrap();
    assert_eq!((a.0.w, a.0.b), (b.0.w, b.0.b));
    assert_eq!(a.1, b.1);

    let init = run.maml.as_ref().unwrap();
    let f = run.split.meta_test[0];
    let ctx = data.dataset.feature_observations(f)[..3].to_vec();
    let link = view.model.link_for(f).unwrap();
    assert_eq!(maml_adapt(init, &view, f, &ctx, 0).unwrap(), init.head(link));
    assert_eq!(maml_adapt(init, &view, f, &[], 10).unwrap(), init.head(link));
    assert_ne!(maml_adapt(init, &view, f, &ctx, 3).unwrap(), init.head(link));

    let too_big = MamlConfig { meta_batch: run.split.meta_train.len() + 1, ..MamlConfig::default() };
    assert!(maml_meta_train(&view, &run.split, &too_big, &rng).is_err());
}
