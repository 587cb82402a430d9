use super::{evaluate_kshot, Adapters, EvalReport, RunConfig, SplitModeKind};
use crate::baselines::{maml_meta_train, MamlInit};
use crate::chn::{meta_train, Chn};
use crate::data::{split_features, FeatureSplit, MetadataTable, SparseDataset, SplitMode};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::pvae::{train_base, BaseCache, BaseView, PvaeModel};

/// Root stream of a seed; each stage derives its own labelled child.
pub fn seed_rng(seed: u64) -> Rng {
    Rng::new(seed)
}

/// The feature split for a seed: random, or ordered by the metadata scalar.
pub fn make_split(
    dataset: &SparseDataset,
    metadata: Option<&MetadataTable>,
    cfg: &RunConfig,
    seed: u64,
) -> Result<FeatureSplit> {
    match cfg.split_mode {
        SplitModeKind::Random => {
            let mut rng = seed_rng(seed).derive("split");
            split_features(dataset.n_features(), cfg.split, SplitMode::Random(&mut rng))
        }
        SplitModeKind::Ordered => {
            let meta = metadata
                .filter(|m| m.has_scalar())
                .ok_or_else(|| Error::invalid("ordered splits need a metadata scalar per feature"))?;
            let keys: Vec<f64> = meta.entries().iter().map(|e| e.scalar.unwrap_or(0.0)).collect();
            split_features(dataset.n_features(), cfg.split, SplitMode::Ordered(&keys))
        }
    }
}

/// Trains and freezes the base model on the train features.
pub fn base_stage(
    dataset: &SparseDataset,
    split: &FeatureSplit,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(PvaeModel, Vec<f64>)> {
    let rng = seed_rng(seed).derive("base");
    let mut model = PvaeModel::new(
        &cfg.pvae,
        dataset.kinds().to_vec(),
        &split.train,
        &mut rng.derive("init"),
    )?;
    let trace = train_base(&mut model, dataset, &split.train, &cfg.base, &rng.derive("train"))?;
    model.freeze();
    Ok((model, trace))
}

pub fn chn_stage(
    view: &BaseView<'_>,
    metadata: Option<&MetadataTable>,
    split: &FeatureSplit,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(Chn, Vec<f64>)> {
    let rng = seed_rng(seed).derive("chn");
    let meta_dim = metadata.map(MetadataTable::input_dim).filter(|&d| d > 0);
    let mut chn = Chn::new(
        &cfg.chn,
        view.model.latent_dim(),
        view.model.d_dim(),
        meta_dim,
        &mut rng.derive("init"),
    )?;
    let trace = meta_train(&mut chn, view, split, metadata, &cfg.meta, &rng.derive("train"))?;
    Ok((chn, trace))
}

pub fn maml_stage(
    view: &BaseView<'_>,
    split: &FeatureSplit,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(MamlInit, Vec<f64>)> {
    maml_meta_train(view, split, &cfg.maml, &seed_rng(seed).derive("maml"))
}

/// Everything trained for one seed.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub split: FeatureSplit,
    pub base: PvaeModel,
    pub base_trace: Vec<f64>,
    pub cache: BaseCache,
    pub chn: Option<Chn>,
    pub chn_trace: Vec<f64>,
    pub maml: Option<MamlInit>,
    pub maml_trace: Vec<f64>,
}

impl SeedRun {
    pub fn view<'a>(&'a self, dataset: &'a SparseDataset) -> Result<BaseView<'a>> {
        BaseView::new(&self.base, dataset)?.with_cache(&self.cache)
    }

    pub fn adapters<'a>(
        &'a self,
        dataset: &'a SparseDataset,
        metadata: Option<&'a MetadataTable>,
        cfg: &RunConfig,
    ) -> Result<Adapters<'a>> {
        Adapters::new(
            self.view(dataset)?,
            metadata,
            &self.split,
            self.chn.as_ref(),
            self.maml.as_ref(),
            cfg.finetune_lr,
        )
    }
}

/// Splits, trains the base model, then the hypernetwork and MAML when asked.
pub fn train_seed(
    dataset: &SparseDataset,
    metadata: Option<&MetadataTable>,
    cfg: &RunConfig,
    seed: u64,
    with_chn: bool,
    with_maml: bool,
) -> Result<SeedRun> {
    let split = make_split(dataset, metadata, cfg, seed)?;
    let (base, base_trace) = base_stage(dataset, &split, cfg, seed)?;
    let cache = BaseCache::new(&base, dataset)?;
    let view = BaseView::new(&base, dataset)?.with_cache(&cache)?;
    let (chn, chn_trace) = if with_chn {
        let (c, t) = chn_stage(&view, metadata, &split, cfg, seed)?;
        (Some(c), t)
    } else {
        (None, Vec::new())
    };
    let (maml, maml_trace) = if with_maml {
        let (m, t) = maml_stage(&view, &split, cfg, seed)?;
        (Some(m), t)
    } else {
        (None, Vec::new())
    };
    Ok(SeedRun {
        seed,
        split,
        base,
        base_trace,
        cache,
        chn,
        chn_trace,
        maml,
        maml_trace,
    })
}

/// Evaluates the configured methods for one trained seed.
pub fn evaluate_seed(
    run: &SeedRun,
    dataset: &SparseDataset,
    metadata: Option<&MetadataTable>,
    cfg: &RunConfig,
) -> Result<EvalReport> {
    let adapters = run.adapters(dataset, metadata, cfg)?;
    let rng = seed_rng(run.seed).derive("eval");
    evaluate_kshot(&adapters, &run.split, &cfg.methods, &cfg.ks, run.seed, &rng)
}

/// Trains and evaluates every configured seed, concatenating the reports.
pub fn run_all(
    dataset: &SparseDataset,
    metadata: Option<&MetadataTable>,
    cfg: &RunConfig,
) -> Result<EvalReport> {
    let with_chn = cfg.methods.iter().any(|m| m.needs_chn());
    let with_maml = cfg.methods.iter().any(|m| m.needs_maml());
    let mut report = EvalReport::default();
    for &seed in &cfg.seeds {
        let run = train_seed(dataset, metadata, cfg, seed, with_chn, with_maml)?;
        let r = evaluate_seed(&run, dataset, metadata, cfg)?;
        report.rows.extend(r.rows);
        report.episodes.extend(r.episodes);
    }
    Ok(report)
}
