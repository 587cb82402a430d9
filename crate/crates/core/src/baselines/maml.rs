use super::finetune::{context_trunks, fit_head, head_nll};
use crate::data::{sample_context_size, sample_episode, FeatureSplit};
use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Adam, AdamConfig, Rng};
use crate::pvae::{BaseView, HeadParams, Link};

#[derive(Clone, Debug, PartialEq)]
pub struct MamlConfig {
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub inner_steps: usize,
    pub meta_batch: usize,
    pub epochs: usize,
    pub max_targets: usize,
}

impl Default for MamlConfig {
    fn default() -> Self {
        Self {
            inner_lr: 1e-2,
            outer_lr: 1e-2,
            inner_steps: 10,
            meta_batch: 4,
            epochs: 100,
            max_targets: 256,
        }
    }
}

/// Meta-learned head initialisation shared by every new feature; the link
/// is chosen per feature when the head is used.
#[derive(Clone, Debug, PartialEq)]
pub struct MamlInit {
    pub w: Vec<f64>,
    pub b: f64,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub inner_steps: usize,
    pub meta_batch: usize,
}

impl MamlInit {
    pub fn head(&self, link: Link) -> HeadParams {
        HeadParams {
            w: self.w.clone(),
            b: self.b,
            link,
        }
    }
}

/// First-order feature-wise MAML. Each task is a meta-train feature with a
/// freshly drawn context size: a copy of the initialisation is adapted for
/// `inner_steps` Adam steps on the context NLL, then the gradient of the
/// target NLL at the adapted head is averaged over the batch and applied to
/// the initialisation with Adam. Returns the initialisation and its mean
/// outer loss on a fixed set of probe episodes (one per meta-train feature,
/// drawn once), measured before training and after every epoch.
pub fn maml_meta_train(
    view: &BaseView<'_>,
    split: &FeatureSplit,
    cfg: &MamlConfig,
    rng: &Rng,
) -> Result<(MamlInit, Vec<f64>)> {
    if !(cfg.inner_lr >= 0.0 && cfg.outer_lr > 0.0) {
        return Err(Error::invalid("MAML learning rates must be positive"));
    }
    if cfg.meta_batch == 0 || cfg.max_targets == 0 {
        return Err(Error::invalid("meta batch and target cap must be positive"));
    }
    let features: Vec<usize> = split
        .meta_train
        .iter()
        .copied()
        .filter(|&f| view.dataset.observed_count(f) > 0)
        .collect();
    if features.len() < cfg.meta_batch {
        return Err(Error::invalid(format!(
            "{} usable meta-train features for a meta batch of {}",
            features.len(),
            cfg.meta_batch
        )));
    }
    let d_dim = view.model.d_dim();
    let w = xavier_init(d_dim, 1, &mut rng.derive("init"))?;
    let mut theta = HeadParams {
        w: w.data().to_vec(),
        b: 0.0,
        link: Link::Identity,
    };
    let variance = view.model.output_variance();
    let mut outer = Adam::new(AdamConfig::default());
    let probe_rng = rng.derive("probe");
    let probes = features
        .iter()
        .map(|&f| {
            let mut r = probe_rng.derive_index(f as u64);
            let k = sample_context_size(&mut r);
            let mut ep = sample_episode(view.dataset, f, k, &mut r)?;
            ep.cap_targets(cfg.max_targets, &mut r);
            let link = view.model.link_for(f)?;
            Ok(Task {
                link,
                context: context_trunks(view, f, &ep.context)?,
                targets: context_trunks(view, f, &ep.target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    trace.push(probe_loss(&theta, &probes, variance, cfg)?);
    let shuffle_rng = rng.derive("shuffle");
    let episode_rng = rng.derive("episodes");
    for epoch in 0..cfg.epochs as u64 {
        let mut order = features.clone();
        shuffle_rng.derive_index(epoch).shuffle(&mut order);
        let epoch_rng = episode_rng.derive_index(epoch);
        for batch in order.chunks(cfg.meta_batch) {
            let mut grad = HeadParams::zeros(d_dim, Link::Identity);
            let mut used = 0usize;
            for &f in batch {
                let mut r = epoch_rng.derive_index(f as u64);
                let k = sample_context_size(&mut r);
                let mut ep = sample_episode(view.dataset, f, k, &mut r)?;
                ep.cap_targets(cfg.max_targets, &mut r);
                if ep.target.is_empty() {
                    continue;
                }
                let task = Task {
                    link: view.model.link_for(f)?,
                    context: context_trunks(view, f, &ep.context)?,
                    targets: context_trunks(view, f, &ep.target)?,
                };
                let (_, g) = task.outer(&theta, variance, cfg)?;
                crate::numerics::axpy(1.0, &g.w, &mut grad.w);
                grad.b += g.b;
                used += 1;
            }
            if used == 0 {
                continue;
            }
            let n = used as f64;
            grad.w.iter_mut().for_each(|v| *v /= n);
            grad.b /= n;
            outer.step(&mut theta, &grad, cfg.outer_lr, 0.0)?;
        }
        trace.push(probe_loss(&theta, &probes, variance, cfg)?);
    }
    Ok((
        MamlInit {
            w: theta.w,
            b: theta.b,
            inner_lr: cfg.inner_lr,
            outer_lr: cfg.outer_lr,
            inner_steps: cfg.inner_steps,
            meta_batch: cfg.meta_batch,
        },
        trace,
    ))
}

struct Task {
    link: Link,
    context: Vec<(Vec<f64>, f64)>,
    targets: Vec<(Vec<f64>, f64)>,
}

impl Task {
    /// Target NLL after inner adaptation and its gradient at the adapted head.
    fn outer(&self, theta: &HeadParams, variance: f64, cfg: &MamlConfig) -> Result<(f64, HeadParams)> {
        let start = HeadParams { link: self.link, ..theta.clone() };
        let (adapted, _) = fit_head(&start, &self.context, variance, cfg.inner_steps, cfg.inner_lr)?;
        head_nll(&adapted, &self.targets, variance)
    }
}

fn probe_loss(theta: &HeadParams, probes: &[Task], variance: f64, cfg: &MamlConfig) -> Result<f64> {
    let scored: Vec<&Task> = probes.iter().filter(|t| !t.targets.is_empty()).collect();
    if scored.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for t in &scored {
        total += t.outer(theta, variance, cfg)?.0;
    }
    Ok(total / scored.len() as f64)
}

/// Fine-tunes the meta-learned initialisation on a context with the inner
/// learning rate; zero epochs or an empty context return it unchanged.
pub fn maml_adapt(
    init: &MamlInit,
    view: &BaseView<'_>,
    feature: usize,
    context: &[(usize, f64)],
    fine_tune_epochs: usize,
) -> Result<HeadParams> {
    let start = init.head(view.model.link_for(feature)?);
    super::train_from_random(view, &start, feature, context, fine_tune_epochs, init.inner_lr)
}
