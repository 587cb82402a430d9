use std::borrow::Cow;

use super::{Chn, ChnParams, ContextPoint};
use crate::data::{sample_context_size, sample_episode, Episode, FeatureSplit, MetadataTable};
use crate::error::{Error, Result};
use crate::numerics::{Adam, AdamConfig, Parameters, Rng};
use crate::pvae::{BaseView, HeadParams};

/// Encoded metadata for `feature` when the hypernetwork consumes it.
fn meta_input(chn: &Chn, metadata: Option<&MetadataTable>, feature: usize) -> Result<Option<Vec<f64>>> {
    if !chn.uses_metadata() {
        return Ok(None);
    }
    let table = metadata.ok_or_else(|| Error::invalid("this hypernetwork requires metadata"))?;
    if feature >= table.len() {
        return Err(Error::invalid(format!("no metadata for feature {feature}")));
    }
    Ok(Some(table.encode(feature)))
}

fn latents<'a>(
    view: &BaseView<'a>,
    feature: usize,
    context: &[(usize, f64)],
) -> Result<Vec<(Cow<'a, [f64]>, f64)>> {
    let mut ctx = context.to_vec();
    ctx.sort_by_key(|&(r, _)| r);
    ctx.iter()
        .map(|&(r, x)| Ok((view.latent(r, feature)?, x)))
        .collect()
}

fn points<'b>(latents: &'b [(Cow<'_, [f64]>, f64)]) -> Vec<ContextPoint<'b>> {
    latents
        .iter()
        .map(|(z, x)| ContextPoint { z: z.as_ref(), x: *x })
        .collect()
}

/// Head for `feature` from its context observations `(row, value)`.
/// Context rows are encoded without the feature itself and summed in
/// ascending row order.
pub fn chn_head(
    chn: &Chn,
    view: &BaseView<'_>,
    metadata: Option<&MetadataTable>,
    feature: usize,
    context: &[(usize, f64)],
) -> Result<HeadParams> {
    let z = latents(view, feature, context)?;
    let meta = meta_input(chn, metadata, feature)?;
    chn.predict_head(&points(&z), meta.as_deref(), view.model.link_for(feature)?)
}

/// Mean target log-likelihood over a batch of episodes and its gradient with
/// respect to the hypernetwork only.
#[derive(Clone, Debug)]
pub struct MetaLoss {
    /// Sum of target log-likelihoods divided by the total target count.
    pub log_likelihood: f64,
    pub n_targets: usize,
    /// Gradient of `log_likelihood`.
    pub grads: ChnParams,
}

pub fn meta_loss(
    chn: &Chn,
    view: &BaseView<'_>,
    metadata: Option<&MetadataTable>,
    episodes: &[Episode],
) -> Result<MetaLoss> {
    let n_targets: usize = episodes.iter().map(|e| e.target.len()).sum();
    if n_targets == 0 {
        return Err(Error::invalid("meta-loss needs at least one target"));
    }
    let scale = 1.0 / n_targets as f64;
    let variance = view.model.output_variance();
    let mut grads = chn.params().zeros_like();
    let mut total = 0.0;
    for ep in episodes {
        if ep.target.is_empty() {
            continue;
        }
        let z = latents(view, ep.feature, &ep.context)?;
        let meta = meta_input(chn, metadata, ep.feature)?;
        let link = view.model.link_for(ep.feature)?;
        let (head, trace) = chn.predict_head_traced(&points(&z), meta.as_deref(), link)?;
        let mut head_grad = HeadParams::zeros(head.d_dim(), link);
        for &(r, x) in &ep.target {
            let d = view.trunk(r, ep.feature)?;
            // Scaling by -1/N turns NLL gradients into log-likelihood ones.
            let (nll, _) = head.accumulate_nll_grad(&d, x, variance, -scale, &mut head_grad)?;
            total -= nll;
        }
        chn.head_backward(&trace, &head_grad, &mut grads)?;
    }
    Ok(MetaLoss {
        log_likelihood: total * scale,
        n_targets,
        grads,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaTrainConfig {
    pub epochs: usize,
    pub feature_batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Upper bound on target rows per episode.
    pub max_targets: usize,
}

impl Default for MetaTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            feature_batch_size: 8,
            lr: 1e-3,
            weight_decay: 1e-3,
            max_targets: 256,
        }
    }
}

/// Meta-trains the hypernetwork on the meta-train features. Each epoch
/// shuffles the features; every batch draws fresh context sizes and
/// episodes, predicts heads and takes one Adam ascent step on the mean
/// target log-likelihood. Returns the per-epoch log-likelihood (pre-update).
pub fn meta_train(
    chn: &mut Chn,
    view: &BaseView<'_>,
    split: &FeatureSplit,
    metadata: Option<&MetadataTable>,
    cfg: &MetaTrainConfig,
    rng: &Rng,
) -> Result<Vec<f64>> {
    if cfg.feature_batch_size == 0 || cfg.max_targets == 0 {
        return Err(Error::invalid("batch size and target cap must be positive"));
    }
    if chn.d_dim() != view.model.d_dim() || chn.latent_dim() != view.model.latent_dim() {
        return Err(Error::invalid("hypernetwork does not match the base model"));
    }
    let features: Vec<usize> = split
        .meta_train
        .iter()
        .copied()
        .filter(|&f| view.dataset.observed_count(f) > 0)
        .collect();
    if features.is_empty() {
        return Err(Error::invalid("no meta-train feature has observations"));
    }
    let mut adam = Adam::new(AdamConfig::default());
    let mut trace = Vec::with_capacity(cfg.epochs);
    let shuffle_rng = rng.derive("shuffle");
    let episode_rng = rng.derive("episodes");
    for epoch in 0..cfg.epochs as u64 {
        let mut order = features.clone();
        shuffle_rng.derive_index(epoch).shuffle(&mut order);
        let epoch_rng = episode_rng.derive_index(epoch);
        let (mut ll_sum, mut n_sum) = (0.0, 0usize);
        for batch in order.chunks(cfg.feature_batch_size) {
            let mut episodes = Vec::with_capacity(batch.len());
            for &f in batch {
                let mut r = epoch_rng.derive_index(f as u64);
                let k = sample_context_size(&mut r);
                let mut ep = sample_episode(view.dataset, f, k, &mut r)?;
                ep.cap_targets(cfg.max_targets, &mut r);
                episodes.push(ep);
            }
            if episodes.iter().all(|e| e.target.is_empty()) {
                continue;
            }
            let loss = meta_loss(chn, view, metadata, &episodes)?;
            ll_sum += loss.log_likelihood * loss.n_targets as f64;
            n_sum += loss.n_targets;
            let mut descent = loss.grads;
            descent.visit_mut(&mut |_, _, _, d| d.iter_mut().for_each(|v| *v = -*v));
            adam.step(chn.params_mut(), &descent, cfg.lr, cfg.weight_decay)?;
        }
        trace.push(if n_sum > 0 { ll_sum / n_sum as f64 } else { f64::NAN });
    }
    Ok(trace)
}
