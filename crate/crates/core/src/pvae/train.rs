use super::{PvaeModel, PvaeParams};
use crate::data::{bernoulli_mask, MaskedRow, SparseDataset};
use crate::error::{Error, Result};
use crate::numerics::{
    axpy, kl_standard_normal, kl_standard_normal_grad, reparameterize, reparameterize_backward,
    Adam, AdamConfig, Parameters, Rng,
};

/// Single-sample ELBO estimate for one row and the gradient of its negation.
#[derive(Clone, Debug)]
pub struct ElboEstimate {
    pub elbo: f64,
    pub reconstruction_nll: f64,
    pub kl: f64,
    /// Gradient of `-elbo`.
    pub grads: PvaeParams,
}

/// Encodes the kept observations, samples `z` once and scores every kept and
/// hidden observation that has a head. Gradients cover all base tensors.
pub fn elbo(model: &PvaeModel, row: &MaskedRow, rng: &mut Rng) -> Result<ElboEstimate> {
    let mut grads = model.params().zeros_like();
    let (elbo, reconstruction_nll, kl) = elbo_into(model, row, rng, 1.0, &mut grads)?;
    Ok(ElboEstimate {
        elbo,
        reconstruction_nll,
        kl,
        grads,
    })
}

/// Adds `d(-elbo)` into `grads`; returns `(elbo, nll, kl)`.
fn elbo_into(
    model: &PvaeModel,
    row: &MaskedRow,
    rng: &mut Rng,
    kl_weight: f64,
    grads: &mut PvaeParams,
) -> Result<(f64, f64, f64)> {
    let targets: Vec<(usize, f64)> = row
        .observed
        .iter()
        .chain(&row.hidden)
        .copied()
        .filter(|(f, _)| model.has_head(*f))
        .collect();
    if targets.is_empty() {
        return Err(Error::invalid(format!("row {} has nothing to reconstruct", row.row)));
    }
    let trace = model.encode_traced(&model.encoder_inputs(&row.observed))?;
    let sample = reparameterize(&trace.mu, &trace.logvar, rng)?;
    let params = model.params();
    let (d, trunk_tape) = params.decoder.forward(&sample.z)?;

    let variance = model.output_variance();
    let mut nll = 0.0;
    let mut dd = vec![0.0; d.len()];
    for &(f, x) in &targets {
        let head = &params.heads[&f];
        let grad_head = grads.heads.get_mut(&f).expect("gradient heads mirror the model");
        let (l, g) = head.accumulate_nll_grad(&d, x, variance, 1.0, grad_head)?;
        nll += l;
        axpy(g, &head.w, &mut dd);
    }
    let dz = params.decoder.backward_into(&trunk_tape, &dd, &mut grads.decoder)?;
    let (mut dmu, mut dlv) = reparameterize_backward(&dz, &trace.logvar, &sample.noise);
    let kl = kl_standard_normal(&trace.mu, &trace.logvar)?;
    let (kmu, klv) = kl_standard_normal_grad(&trace.mu, &trace.logvar);
    axpy(kl_weight, &kmu, &mut dmu);
    axpy(kl_weight, &klv, &mut dlv);
    model.encode_backward(&trace, &dmu, &dlv, grads)?;
    Ok((-(nll + kl), nll, kl))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaseTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Probability that an observation stays visible to the encoder.
    pub p_keep: f64,
    /// Epochs over which the KL weight ramps linearly up to 1.
    pub kl_warmup_epochs: usize,
}

impl Default for BaseTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 100,
            lr: 1e-2,
            weight_decay: 0.0,
            p_keep: 0.8,
            kl_warmup_epochs: 0,
        }
    }
}

fn scale_params(p: &mut PvaeParams, s: f64) {
    p.visit_mut(&mut |_, _, _, d| d.iter_mut().for_each(|v| *v *= s));
}

/// Mini-batch Adam ascent on the ELBO over rows that observe at least one
/// training feature. Masks and latent samples are redrawn every epoch from
/// per-epoch, per-row streams. Returns the mean ELBO of each epoch.
pub fn train_base(
    model: &mut PvaeModel,
    dataset: &SparseDataset,
    train_features: &[usize],
    cfg: &BaseTrainConfig,
    rng: &Rng,
) -> Result<Vec<f64>> {
    if train_features.is_empty() {
        return Err(Error::invalid("the train feature set is empty"));
    }
    let mut wanted = train_features.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    if model.head_features() != wanted {
        return Err(Error::invalid("model heads must match the train feature set exactly"));
    }
    if dataset.n_features() != model.n_features() {
        return Err(Error::invalid("dataset and model disagree on the feature count"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    model.params_mut()?;
    let rows: Vec<usize> = (0..dataset.n_rows())
        .filter(|&r| dataset.row(r).iter().any(|(f, _)| model.has_head(*f)))
        .collect();
    if rows.is_empty() && cfg.epochs > 0 {
        return Err(Error::invalid("no row observes a training feature"));
    }

    let mut adam = Adam::new(AdamConfig::default());
    let mut trace = Vec::with_capacity(cfg.epochs);
    let shuffle_rng = rng.derive("shuffle");
    let mask_rng = rng.derive("mask");
    let sample_rng = rng.derive("sample");
    for epoch in 0..cfg.epochs as u64 {
        let mut order = rows.clone();
        shuffle_rng.derive_index(epoch).shuffle(&mut order);
        let epoch_mask = mask_rng.derive_index(epoch);
        let epoch_sample = sample_rng.derive_index(epoch);
        let kl_weight = if cfg.kl_warmup_epochs == 0 {
            1.0
        } else {
            ((epoch + 1) as f64 / cfg.kl_warmup_epochs as f64).min(1.0)
        };
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.params().zeros_like();
            for &r in batch {
                let obs = model.encoder_inputs(dataset.row(r));
                let masked = bernoulli_mask(r, &obs, cfg.p_keep, &mut epoch_mask.derive_index(r as u64))?;
                let mut noise = epoch_sample.derive_index(r as u64);
                total += elbo_into(model, &masked, &mut noise, kl_weight, &mut grads)?.0;
            }
            scale_params(&mut grads, 1.0 / batch.len() as f64);
            adam.step(model.params_mut()?, &grads, cfg.lr, cfg.weight_decay)?;
        }
        trace.push(total / rows.len() as f64);
    }
    Ok(trace)
}
