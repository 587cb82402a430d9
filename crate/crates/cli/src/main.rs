use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chn_core::baselines::MamlInit;
use chn_core::chn::Chn;
use chn_core::data::{
    generate_synthetic, load_data_dir, save_data_dir, write_factors, DataDir, FeatureKind, FeatureSplit,
    KindSpec, MetadataTable, SparseDataset, SynthConfig,
};
use chn_core::harness::{
    aggregate, base_stage, chn_stage, evaluate_kshot, format_aggregate, format_episodes, format_report,
    format_timing, load_chn, load_maml, load_pvae, maml_stage, make_split, parse_methods, save_chn, save_maml,
    save_pvae, seed_rng, time_initialization, write_text, Adapters, RunConfig,
};
use chn_core::numerics::Rng;
use chn_core::pvae::{BaseCache, BaseView, PvaeModel};
use clap::{Args, Parser, Subcommand};

/// Few-shot decoder heads for new features of a partial VAE.
#[derive(Parser)]
#[command(name = "chn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a low-rank synthetic dataset directory.
    Synth(SynthArgs),
    /// Train and freeze the base model on the train features.
    TrainBase(TrainBaseArgs),
    /// Meta-train the hypernetwork against a frozen base model.
    MetaTrain(StageArgs),
    /// Meta-train the MAML head initialisation against a frozen base model.
    MamlTrain(StageArgs),
    /// Score methods on the meta-test features for every context size.
    Evaluate(EvaluateArgs),
    /// Time head production per method and context size.
    Timing(TimingArgs),
}

#[derive(Args)]
struct Common {
    /// Root of every random stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory written by `synth` or laid out the same way.
    #[arg(long)]
    data: PathBuf,
    /// Kind of features not listed in the directory's feature sidecar.
    #[arg(long, default_value = "binary")]
    kind: FeatureKind,
}

impl DataArgs {
    fn load(&self) -> Result<(SparseDataset, Option<MetadataTable>)> {
        load_data_dir(&DataDir::new(&self.data), &KindSpec::all(self.kind))
            .with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long, default_value_t = 60)]
    features: usize,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 0.12)]
    obs_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value = "binary")]
    kind: FeatureKind,
    #[arg(long, default_value_t = 4)]
    tag_groups: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainBaseArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Writes the per-epoch training loss, one value per line.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// Base model checkpoint from `train-base`.
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct Trained {
    #[arg(long)]
    base: PathBuf,
    /// Hypernetwork checkpoint, needed by `chn` and `chn_then_finetune`.
    #[arg(long)]
    chn: Option<PathBuf>,
    /// MAML checkpoint, needed by `maml`.
    #[arg(long)]
    maml: Option<PathBuf>,
    /// Comma-separated methods, overriding the config.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated context sizes, overriding the config.
    #[arg(long)]
    ks: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    trained: Trained,
    /// Per-feature report CSV.
    #[arg(long)]
    out: PathBuf,
    /// Mean and std per (method, k) across the report's seeds.
    #[arg(long)]
    aggregate: Option<PathBuf>,
    /// Context hash of every episode.
    #[arg(long)]
    episodes: Option<PathBuf>,
}

#[derive(Args)]
struct TimingArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    trained: Trained,
    #[arg(long)]
    out: PathBuf,
}

fn write_trace(path: Option<&Path>, trace: &[f64]) -> Result<()> {
    if let Some(path) = path {
        let text: String = trace.iter().map(|v| format!("{v}\n")).collect();
        write_text(path, &text)?;
    }
    Ok(())
}

/// The split of `seed`, checked against the features the base model was
/// trained on.
fn split_for(base: &PvaeModel, ds: &SparseDataset, meta: Option<&MetadataTable>, cfg: &RunConfig, seed: u64) -> Result<FeatureSplit> {
    let split = make_split(ds, meta, cfg, seed)?;
    if base.head_features() != split.train {
        bail!("the base checkpoint was trained on a different feature split; use the seed and config it was trained with");
    }
    Ok(split)
}

fn synth(args: &SynthArgs) -> Result<()> {
    args.common.run_config()?;
    let cfg = SynthConfig {
        n_rows: args.rows,
        n_features: args.features,
        rank: args.rank,
        noise_sd: args.noise_sd,
        obs_prob: args.obs_prob,
        kind: args.kind,
        n_tag_groups: args.tag_groups,
    };
    let data = generate_synthetic(&cfg, &Rng::new(args.common.seed))?;
    let dir = DataDir::new(&args.out);
    save_data_dir(&dir, &data.dataset, Some(&data.metadata))?;
    write_factors(dir.row_factors(), &data.row_factors)?;
    write_factors(dir.feature_factors(), &data.feature_factors)?;
    Ok(())
}

fn train_base(args: &TrainBaseArgs) -> Result<()> {
    let cfg = args.common.run_config()?;
    let (ds, meta) = args.data.load()?;
    let split = make_split(&ds, meta.as_ref(), &cfg, args.common.seed)?;
    let (model, trace) = base_stage(&ds, &split, &cfg, args.common.seed)?;
    save_pvae(&model, &args.out)?;
    write_trace(args.trace.as_deref(), &trace)
}

fn meta_train(args: &StageArgs) -> Result<()> {
    let cfg = args.common.run_config()?;
    let (ds, meta) = args.data.load()?;
    let base = load_pvae(&args.base)?;
    let split = split_for(&base, &ds, meta.as_ref(), &cfg, args.common.seed)?;
    let cache = BaseCache::new(&base, &ds)?;
    let view = BaseView::new(&base, &ds)?.with_cache(&cache)?;
    let (chn, trace) = chn_stage(&view, meta.as_ref(), &split, &cfg, args.common.seed)?;
    save_chn(&chn, &args.out)?;
    write_trace(args.trace.as_deref(), &trace)
}

fn maml_train(args: &StageArgs) -> Result<()> {
    let cfg = args.common.run_config()?;
    let (ds, meta) = args.data.load()?;
    let base = load_pvae(&args.base)?;
    let split = split_for(&base, &ds, meta.as_ref(), &cfg, args.common.seed)?;
    let cache = BaseCache::new(&base, &ds)?;
    let view = BaseView::new(&base, &ds)?.with_cache(&cache)?;
    let (init, trace) = maml_stage(&view, &split, &cfg, args.common.seed)?;
    save_maml(&init, &args.out)?;
    write_trace(args.trace.as_deref(), &trace)
}

struct Loaded {
    cfg: RunConfig,
    ds: SparseDataset,
    meta: Option<MetadataTable>,
    base: PvaeModel,
    chn: Option<Chn>,
    maml: Option<MamlInit>,
}

fn load_trained(common: &Common, data: &DataArgs, trained: &Trained) -> Result<Loaded> {
    let mut cfg = common.run_config()?;
    if let Some(m) = &trained.methods {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(ks) = &trained.ks {
        cfg.set("ks", ks)?;
    }
    let (ds, meta) = data.load()?;
    Ok(Loaded {
        cfg,
        ds,
        meta,
        base: load_pvae(&trained.base)?,
        chn: trained.chn.as_deref().map(load_chn).transpose()?,
        maml: trained.maml.as_deref().map(load_maml).transpose()?,
    })
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let seed = args.common.seed;
    let l = load_trained(&args.common, &args.data, &args.trained)?;
    let meta = l.meta.as_ref();
    let split = split_for(&l.base, &l.ds, meta, &l.cfg, seed)?;
    let cache = BaseCache::new(&l.base, &l.ds)?;
    let view = BaseView::new(&l.base, &l.ds)?.with_cache(&cache)?;
    let adapters = Adapters::new(view, meta, &split, l.chn.as_ref(), l.maml.as_ref(), l.cfg.finetune_lr)?;
    let report = evaluate_kshot(&adapters, &split, &l.cfg.methods, &l.cfg.ks, seed, &seed_rng(seed).derive("eval"))?;
    write_text(&args.out, &format_report(&l.cfg, &l.ds, &report.rows))?;
    if let Some(path) = &args.aggregate {
        write_text(path, &format_aggregate(&aggregate(&report.rows)))?;
    }
    if let Some(path) = &args.episodes {
        write_text(path, &format_episodes(&l.ds, &report.episodes, seed))?;
    }
    Ok(())
}

fn timing(args: &TimingArgs) -> Result<()> {
    let seed = args.common.seed;
    let mut l = load_trained(&args.common, &args.data, &args.trained)?;
    if args.trained.ks.is_none() {
        l.cfg.ks = l.cfg.timing_ks.clone();
    }
    let meta = l.meta.as_ref();
    let split = split_for(&l.base, &l.ds, meta, &l.cfg, seed)?;
    let view = BaseView::new(&l.base, &l.ds)?;
    let adapters = Adapters::new(view, meta, &split, l.chn.as_ref(), l.maml.as_ref(), l.cfg.finetune_lr)?;
    let rng = seed_rng(seed).derive("timing");
    let mut rows = Vec::new();
    for &m in &l.cfg.methods {
        for &k in &l.cfg.ks {
            rows.push(time_initialization(
                &adapters,
                m,
                &split.meta_test,
                k,
                l.cfg.timing_batch_size,
                l.cfg.timing_repetitions,
                &rng,
            )?);
        }
    }
    write_text(&args.out, &format_timing(&rows))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::TrainBase(a) => train_base(a),
        Command::MetaTrain(a) => meta_train(a),
        Command::MamlTrain(a) => maml_train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Timing(a) => timing(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
