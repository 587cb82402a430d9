use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{parse_methods, MethodId};
use crate::baselines::MamlConfig;
use crate::chn::{ChnConfig, MetaTrainConfig};
use crate::data::SplitFractions;
use crate::error::{Error, Result};
use crate::pvae::{BaseTrainConfig, PvaeConfig};

/// How features are assigned to the three splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitModeKind {
    Random,
    /// Ascending by the metadata scalar.
    Ordered,
}

/// Every tunable of a run, read from flat `key = value` text.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub split: SplitFractions,
    pub split_mode: SplitModeKind,
    pub ks: Vec<usize>,
    pub methods: Vec<MethodId>,
    pub pvae: PvaeConfig,
    pub base: BaseTrainConfig,
    pub chn: ChnConfig,
    pub meta: MetaTrainConfig,
    pub maml: MamlConfig,
    pub finetune_lr: f64,
    pub timing_batch_size: usize,
    pub timing_repetitions: usize,
    pub timing_ks: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
            split: SplitFractions::default(),
            split_mode: SplitModeKind::Random,
            ks: vec![0, 1, 2, 4, 8, 16, 32],
            methods: parse_methods(
                "chn,random,mean_impute,mean_head,mean_head_matching,knn:10,\
                 train_from_random:10,maml:10,chn_then_finetune:10",
            )
            .expect("default methods parse"),
            pvae: PvaeConfig::default(),
            base: BaseTrainConfig::default(),
            chn: ChnConfig::default(),
            meta: MetaTrainConfig::default(),
            maml: MamlConfig::default(),
            finetune_lr: 1e-2,
            timing_batch_size: 128,
            timing_repetitions: 20,
            timing_ks: vec![1, 16],
        }
    }
}

/// Every accepted key, in the order they are echoed.
pub const CONFIG_KEYS: &[&str] = &[
    "seeds",
    "split",
    "split_mode",
    "ks",
    "methods",
    "embedding_dim",
    "set_dim",
    "latent_dim",
    "point_hidden",
    "encoder_hidden",
    "decoder_layers",
    "output_variance",
    "base_epochs",
    "base_batch_size",
    "base_lr",
    "base_weight_decay",
    "p_keep",
    "kl_warmup_epochs",
    "chn_point_dim",
    "chn_point_hidden",
    "chn_context_dim",
    "chn_context_hidden",
    "chn_meta_dim",
    "chn_meta_hidden",
    "chn_pred_hidden",
    "meta_epochs",
    "meta_batch_size",
    "meta_lr",
    "meta_weight_decay",
    "meta_max_targets",
    "maml_inner_lr",
    "maml_outer_lr",
    "maml_inner_steps",
    "maml_meta_batch",
    "maml_epochs",
    "finetune_lr",
    "timing_batch_size",
    "timing_repetitions",
    "timing_ks",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {v:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn positive(key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::invalid(format!("{key} must be positive")));
    }
    Ok(v)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)
            .map_err(|e| Error::data(path.display().to_string(), e.to_string()))?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::invalid(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seeds" => {
                self.seeds = parse_list(key, v)?;
                if self.seeds.is_empty() {
                    return Err(Error::invalid("seeds must not be empty"));
                }
            }
            "split" => {
                let p: Vec<f64> = parse_list(key, v)?;
                let [a, b, c] = p[..] else {
                    return Err(Error::invalid("split takes three fractions"));
                };
                self.split = SplitFractions::new(a, b, c)?;
            }
            "split_mode" => {
                self.split_mode = match v {
                    "random" => SplitModeKind::Random,
                    "ordered" => SplitModeKind::Ordered,
                    _ => return Err(Error::invalid(format!("unknown split_mode {v:?}"))),
                }
            }
            "ks" => self.ks = parse_list(key, v)?,
            "methods" => self.methods = parse_methods(v)?,
            "embedding_dim" => self.pvae.embedding_dim = positive(key, parse(key, v)?)?,
            "set_dim" => self.pvae.set_dim = positive(key, parse(key, v)?)?,
            "latent_dim" => self.pvae.latent_dim = positive(key, parse(key, v)?)?,
            "point_hidden" => self.pvae.point_hidden = parse_list(key, v)?,
            "encoder_hidden" => self.pvae.encoder_hidden = parse_list(key, v)?,
            "decoder_layers" => {
                self.pvae.decoder_layers = parse_list(key, v)?;
                if self.pvae.decoder_layers.is_empty() {
                    return Err(Error::invalid("decoder_layers needs at least one width"));
                }
            }
            "output_variance" => self.pvae.output_variance = parse(key, v)?,
            "base_epochs" => self.base.epochs = parse(key, v)?,
            "base_batch_size" => self.base.batch_size = positive(key, parse(key, v)?)?,
            "base_lr" => self.base.lr = parse(key, v)?,
            "base_weight_decay" => self.base.weight_decay = parse(key, v)?,
            "p_keep" => self.base.p_keep = parse(key, v)?,
            "kl_warmup_epochs" => self.base.kl_warmup_epochs = parse(key, v)?,
            "chn_point_dim" => self.chn.point_dim = positive(key, parse(key, v)?)?,
            "chn_point_hidden" => self.chn.point_hidden = parse_list(key, v)?,
            "chn_context_dim" => self.chn.context_dim = positive(key, parse(key, v)?)?,
            "chn_context_hidden" => self.chn.context_hidden = parse_list(key, v)?,
            "chn_meta_dim" => self.chn.meta_dim = positive(key, parse(key, v)?)?,
            "chn_meta_hidden" => self.chn.meta_hidden = parse_list(key, v)?,
            "chn_pred_hidden" => self.chn.pred_hidden = parse_list(key, v)?,
            "meta_epochs" => self.meta.epochs = parse(key, v)?,
            "meta_batch_size" => self.meta.feature_batch_size = positive(key, parse(key, v)?)?,
            "meta_lr" => self.meta.lr = parse(key, v)?,
            "meta_weight_decay" => self.meta.weight_decay = parse(key, v)?,
            "meta_max_targets" => self.meta.max_targets = positive(key, parse(key, v)?)?,
            "maml_inner_lr" => self.maml.inner_lr = parse(key, v)?,
            "maml_outer_lr" => self.maml.outer_lr = parse(key, v)?,
            "maml_inner_steps" => self.maml.inner_steps = parse(key, v)?,
            "maml_meta_batch" => self.maml.meta_batch = positive(key, parse(key, v)?)?,
            "maml_epochs" => self.maml.epochs = parse(key, v)?,
            "finetune_lr" => self.finetune_lr = parse(key, v)?,
            "timing_batch_size" => self.timing_batch_size = positive(key, parse(key, v)?)?,
            "timing_repetitions" => self.timing_repetitions = parse(key, v)?,
            "timing_ks" => self.timing_ks = parse_list(key, v)?,
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "seeds" => list(&self.seeds),
            "split" => format!("{},{},{}", self.split.train, self.split.meta_train, self.split.meta_test),
            "split_mode" => match self.split_mode {
                SplitModeKind::Random => "random".into(),
                SplitModeKind::Ordered => "ordered".into(),
            },
            "ks" => list(&self.ks),
            "methods" => list(&self.methods),
            "embedding_dim" => self.pvae.embedding_dim.to_string(),
            "set_dim" => self.pvae.set_dim.to_string(),
            "latent_dim" => self.pvae.latent_dim.to_string(),
            "point_hidden" => list(&self.pvae.point_hidden),
            "encoder_hidden" => list(&self.pvae.encoder_hidden),
            "decoder_layers" => list(&self.pvae.decoder_layers),
            "output_variance" => self.pvae.output_variance.to_string(),
            "base_epochs" => self.base.epochs.to_string(),
            "base_batch_size" => self.base.batch_size.to_string(),
            "base_lr" => self.base.lr.to_string(),
            "base_weight_decay" => self.base.weight_decay.to_string(),
            "p_keep" => self.base.p_keep.to_string(),
            "kl_warmup_epochs" => self.base.kl_warmup_epochs.to_string(),
            "chn_point_dim" => self.chn.point_dim.to_string(),
            "chn_point_hidden" => list(&self.chn.point_hidden),
            "chn_context_dim" => self.chn.context_dim.to_string(),
            "chn_context_hidden" => list(&self.chn.context_hidden),
            "chn_meta_dim" => self.chn.meta_dim.to_string(),
            "chn_meta_hidden" => list(&self.chn.meta_hidden),
            "chn_pred_hidden" => list(&self.chn.pred_hidden),
            "meta_epochs" => self.meta.epochs.to_string(),
            "meta_batch_size" => self.meta.feature_batch_size.to_string(),
            "meta_lr" => self.meta.lr.to_string(),
            "meta_weight_decay" => self.meta.weight_decay.to_string(),
            "meta_max_targets" => self.meta.max_targets.to_string(),
            "maml_inner_lr" => self.maml.inner_lr.to_string(),
            "maml_outer_lr" => self.maml.outer_lr.to_string(),
            "maml_inner_steps" => self.maml.inner_steps.to_string(),
            "maml_meta_batch" => self.maml.meta_batch.to_string(),
            "maml_epochs" => self.maml.epochs.to_string(),
            "finetune_lr" => self.finetune_lr.to_string(),
            "timing_batch_size" => self.timing_batch_size.to_string(),
            "timing_repetitions" => self.timing_repetitions.to_string(),
            "timing_ks" => list(&self.timing_ks),
            _ => return None,
        };
        Some(s)
    }

    /// `(key, value)` for every setting, in [`CONFIG_KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        CONFIG_KEYS
            .iter()
            .map(|&k| (k, self.get(k).expect("every listed key has a value")))
            .collect()
    }

    /// Text that [`RunConfig::apply_text`] reads back to the same config.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_echoes() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\nseeds = 7, 8\nmeta_epochs = 12  # trailing\npoint_hidden =\nmethods = chn,knn:3\n")
            .unwrap();
        assert_eq!(cfg.seeds, vec![7, 8]);
        assert_eq!(cfg.meta.epochs, 12);
        assert!(cfg.pvae.point_hidden.is_empty());
        assert_eq!(cfg.get("methods").unwrap(), "chn,knn:3");
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.entries().len(), CONFIG_KEYS.len());
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("learning_rate = 3").is_err());
        assert!(cfg.apply_text("meta_epochs 3").is_err());
        assert!(cfg.apply_text("base_lr = fast").is_err());
        assert!(cfg.apply_text("split = 0.5,0.5").is_err());
        assert!(cfg.apply_text("split_mode = sideways").is_err());
    }
}
