//! Metrics, evaluation protocol, timing, checkpoints, configuration and the
//! end-to-end pipeline.

mod checkpoint;
mod config;
mod eval;
mod method;
mod metrics;
mod pipeline;
mod report;
mod timing;

pub use checkpoint::{
    load_chn, load_maml, load_pvae, read_tensors, save_chn, save_maml, save_pvae, write_tensors,
    CheckpointKind, Tensor,
};
pub use config::{RunConfig, SplitModeKind, CONFIG_KEYS};
pub use eval::{
    aggregate, evaluate_kshot, fixed_episode, score, Adapters, AggregateRow, EpisodeRecord,
    EvalReport, Metric, ReportRow,
};
pub use method::{parse_methods, MethodId};
pub use metrics::{auroc, rmse};
pub use pipeline::{
    base_stage, chn_stage, evaluate_seed, make_split, maml_stage, run_all, seed_rng, train_seed,
    SeedRun,
};
pub use report::{format_aggregate, format_episodes, format_report, format_timing, write_text};
pub use timing::{time_initialization, TimingResult};
