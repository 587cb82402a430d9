use std::collections::HashMap;
use std::fmt;

use super::{auroc, rmse, MethodId};
use crate::baselines::{
    knn_head, maml_adapt, mean_head, mean_head_matching, mean_impute_head, random_head,
    train_from_random, HeadBank, ImputedColumns, MamlInit,
};
use crate::chn::{chn_head, Chn};
use crate::data::{sample_episode, Episode, FeatureKind, FeatureSplit, MetadataTable};
use crate::error::{Error, Result};
use crate::numerics::{Parameters, Rng};
use crate::pvae::{BaseView, HeadParams};

/// Everything a method may draw on to produce a head.
#[derive(Clone, Debug)]
pub struct Adapters<'a> {
    pub view: BaseView<'a>,
    pub metadata: Option<&'a MetadataTable>,
    pub chn: Option<&'a Chn>,
    pub maml: Option<&'a MamlInit>,
    pub bank: HeadBank,
    pub columns: ImputedColumns,
    /// Mean observed value over train features, per kind; the constant
    /// predictor used when a context is empty.
    pub fallback_means: HashMap<FeatureKind, f64>,
    pub finetune_lr: f64,
}

impl<'a> Adapters<'a> {
    pub fn new(
        view: BaseView<'a>,
        metadata: Option<&'a MetadataTable>,
        split: &FeatureSplit,
        chn: Option<&'a Chn>,
        maml: Option<&'a MamlInit>,
        finetune_lr: f64,
    ) -> Result<Self> {
        let bank = HeadBank::from_model(view.model, metadata)?;
        let columns = ImputedColumns::new(view.dataset, bank.features());
        let mut fallback_means = HashMap::new();
        for kind in [FeatureKind::Binary, FeatureKind::Continuous] {
            let same: Vec<usize> = split
                .train
                .iter()
                .copied()
                .filter(|&f| view.dataset.kind(f) == kind)
                .collect();
            fallback_means.insert(kind, view.dataset.mean_over(&same).unwrap_or(0.5));
        }
        Ok(Self {
            view,
            metadata,
            chn,
            maml,
            bank,
            columns,
            fallback_means,
            finetune_lr,
        })
    }

    /// Same adapters with every base-model lookup recomputed from scratch.
    pub fn uncached(&self) -> Self {
        Self {
            view: self.view.uncached(),
            ..self.clone()
        }
    }

    /// Fails when a method's trained prerequisite is missing.
    pub fn check(&self, method: MethodId) -> Result<()> {
        if method.needs_chn() && self.chn.is_none() {
            return Err(Error::invalid(format!("{method} needs a trained hypernetwork")));
        }
        if method.needs_maml() && self.maml.is_none() {
            return Err(Error::invalid(format!("{method} needs a MAML initialisation")));
        }
        if method.needs_metadata() && self.metadata.is_none() {
            return Err(Error::invalid(format!("{method} needs feature metadata")));
        }
        Ok(())
    }

    /// Head for `feature` given its context `(row, value)` pairs. `rng` is
    /// only consumed by the random initialisations.
    pub fn produce(
        &self,
        method: MethodId,
        feature: usize,
        context: &[(usize, f64)],
        rng: &mut Rng,
    ) -> Result<HeadParams> {
        self.check(method)?;
        let view = &self.view;
        let link = view.model.link_for(feature)?;
        let d_dim = view.model.d_dim();
        let fallback = self.fallback_means[&view.dataset.kind(feature)];
        let head = match method {
            MethodId::Chn => chn_head(self.chn.unwrap(), view, self.metadata, feature, context)?,
            MethodId::Random => random_head(d_dim, link, rng)?,
            MethodId::MeanImpute => {
                let values: Vec<f64> = context.iter().map(|c| c.1).collect();
                mean_impute_head(d_dim, link, &values, fallback)
            }
            MethodId::MeanHead => mean_head(&self.bank, link)?,
            MethodId::MeanHeadMatching => {
                let tags = &self.metadata.unwrap().get(feature).tags;
                mean_head_matching(&self.bank, tags, link)?
            }
            MethodId::Knn(k) => knn_head(&self.bank, &self.columns, context, k, fallback, link)?,
            MethodId::TrainFromRandom(epochs) => {
                let init = random_head(d_dim, link, rng)?;
                train_from_random(view, &init, feature, context, epochs, self.finetune_lr)?
            }
            MethodId::Maml(epochs) => maml_adapt(self.maml.unwrap(), view, feature, context, epochs)?,
            MethodId::ChnThenFinetune(epochs) => {
                let init = chn_head(self.chn.unwrap(), view, self.metadata, feature, context)?;
                train_from_random(view, &init, feature, context, epochs, self.finetune_lr)?
            }
        };
        if !head.is_finite() {
            return Err(Error::Numerical(format!("{method} produced a non-finite head for feature {feature}")));
        }
        Ok(head)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Rmse,
    Auroc,
}

impl Metric {
    pub fn for_kind(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Continuous => Metric::Rmse,
            FeatureKind::Binary => Metric::Auroc,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Rmse => "rmse",
            Metric::Auroc => "auroc",
        })
    }
}

/// One scored `(method, feature, k)` cell. `value` is `None` when the metric
/// is undefined (no targets, or a single label class).
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: MethodId,
    pub feature: usize,
    pub k: usize,
    pub metric: Metric,
    pub value: Option<f64>,
    pub n_targets: usize,
    pub seed: u64,
}

/// Which context each method actually received.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeRecord {
    pub method: MethodId,
    pub feature: usize,
    pub k: usize,
    pub context_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub episodes: Vec<EpisodeRecord>,
}

/// Metric of `head` on the episode's targets.
pub fn score(adapters: &Adapters<'_>, head: &HeadParams, ep: &Episode) -> Result<Option<f64>> {
    if ep.target.is_empty() {
        return Ok(None);
    }
    let view = &adapters.view;
    let mut preds = Vec::with_capacity(ep.target.len());
    let mut truths = Vec::with_capacity(ep.target.len());
    for &(r, x) in &ep.target {
        preds.push(view.predict(head, r, ep.feature)?);
        truths.push(x);
    }
    match view.dataset.kind(ep.feature) {
        FeatureKind::Continuous => Ok(Some(rmse(&preds, &truths, view.dataset.scale(ep.feature))?)),
        FeatureKind::Binary => match auroc(&preds, &truths) {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedMetric(_)) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// The fixed episode for `(feature, k)` under an evaluation stream.
pub fn fixed_episode(adapters: &Adapters<'_>, feature: usize, k: usize, rng: &Rng) -> Result<Episode> {
    let mut r = rng
        .derive("episodes")
        .derive_index(feature as u64)
        .derive_index(k as u64);
    sample_episode(adapters.view.dataset, feature, k, &mut r)
}

/// Scores every method on every meta-test feature and context size. Each
/// `(feature, k)` gets one episode, drawn from a stream that depends only on
/// `rng`, the feature and `k`, and shared by all methods.
pub fn evaluate_kshot(
    adapters: &Adapters<'_>,
    split: &FeatureSplit,
    methods: &[MethodId],
    ks: &[usize],
    seed: u64,
    rng: &Rng,
) -> Result<EvalReport> {
    if split.meta_test.is_empty() {
        return Err(Error::invalid("the meta-test split is empty"));
    }
    for &m in methods {
        adapters.check(m)?;
    }
    let ds = adapters.view.dataset;
    let mut report = EvalReport::default();
    for &feature in &split.meta_test {
        if ds.observed_count(feature) == 0 {
            continue;
        }
        let metric = Metric::for_kind(ds.kind(feature));
        for &k in ks {
            let ep = fixed_episode(adapters, feature, k, rng)?;
            for &method in methods {
                let mut method_rng = rng
                    .derive("methods")
                    .derive(&method.to_string())
                    .derive_index(feature as u64)
                    .derive_index(k as u64);
                let head = adapters.produce(method, feature, &ep.context, &mut method_rng)?;
                report.episodes.push(EpisodeRecord {
                    method,
                    feature,
                    k,
                    context_hash: ep.context_hash(),
                });
                report.rows.push(ReportRow {
                    method,
                    feature,
                    k,
                    metric,
                    value: score(adapters, &head, &ep)?,
                    n_targets: ep.target.len(),
                    seed,
                });
            }
        }
    }
    Ok(report)
}

/// Mean and spread over seeds of each seed's mean metric.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub method: MethodId,
    pub k: usize,
    pub metric: Metric,
    pub mean: Option<f64>,
    /// Sample standard deviation across seeds; zero for a single seed.
    pub std: Option<f64>,
    pub n_seeds: usize,
}

/// Per seed, averages the defined feature values of each
/// `(method, k, metric)`; then averages those seed means. Undefined cells are
/// skipped, and since they depend only on the shared episodes, every method
/// skips the same ones. Output follows the first appearance of each key.
pub fn aggregate(rows: &[ReportRow]) -> Vec<AggregateRow> {
    type Key = (MethodId, usize, Metric);
    let mut order: Vec<Key> = Vec::new();
    let mut per_seed: HashMap<Key, Vec<(u64, f64, usize)>> = HashMap::new();
    for row in rows {
        let key = (row.method, row.k, row.metric);
        let entry = per_seed.entry(key).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        let Some(v) = row.value else { continue };
        match entry.iter_mut().find(|e| e.0 == row.seed) {
            Some(e) => {
                e.1 += v;
                e.2 += 1;
            }
            None => entry.push((row.seed, v, 1)),
        }
    }
    order
        .into_iter()
        .map(|key| {
            let seeds = &per_seed[&key];
            let means: Vec<f64> = seeds.iter().map(|&(_, s, n)| s / n as f64).collect();
            let n = means.len();
            let (mean, std) = if n == 0 {
                (None, None)
            } else {
                let m = means.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                (Some(m), Some(var.sqrt()))
            };
            AggregateRow {
                method: key.0,
                k: key.1,
                metric: key.2,
                mean,
                std,
                n_seeds: n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: MethodId, seed: u64, value: Option<f64>) -> ReportRow {
        ReportRow { method, feature: 0, k: 4, metric: Metric::Auroc, value, n_targets: 3, seed }
    }

    #[test]
    fn aggregates_seed_means() {
        let rows = vec![
            row(MethodId::Chn, 1, Some(0.6)),
            row(MethodId::Chn, 1, Some(0.8)),
            row(MethodId::Chn, 1, None),
            row(MethodId::Chn, 2, Some(0.5)),
            row(MethodId::Random, 1, None),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].n_seeds, 2);
        let m = agg[0].mean.unwrap();
        assert!((m - 0.6).abs() < 1e-15);
        let sd = ((0.7f64 - 0.6).powi(2) + (0.5f64 - 0.6).powi(2)).sqrt();
        assert!((agg[0].std.unwrap() - sd).abs() < 1e-15);
        assert_eq!(agg[1].mean, None);
        assert_eq!(agg[1].n_seeds, 0);
    }
}
