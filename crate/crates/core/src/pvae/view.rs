use std::borrow::Cow;

use super::{BaseCache, HeadParams, PvaeModel};
use crate::data::SparseDataset;
use crate::error::{Error, Result};

/// A frozen base model looking at one dataset, optionally backed by cached
/// row encodings.
///
/// Rows are always encoded without the feature being adapted. The cache is
/// consulted only when that exclusion is automatic, i.e. when the feature has
/// no head and therefore never reaches the encoder.
#[derive(Clone, Copy, Debug)]
pub struct BaseView<'a> {
    pub model: &'a PvaeModel,
    pub dataset: &'a SparseDataset,
    pub cache: Option<&'a BaseCache>,
}

impl<'a> BaseView<'a> {
    pub fn new(model: &'a PvaeModel, dataset: &'a SparseDataset) -> Result<Self> {
        if !model.is_frozen() {
            return Err(Error::Contract("adaptation requires a frozen base model".into()));
        }
        if dataset.n_features() != model.n_features() {
            return Err(Error::invalid("dataset and model disagree on the feature count"));
        }
        Ok(Self {
            model,
            dataset,
            cache: None,
        })
    }

    pub fn with_cache(mut self, cache: &'a BaseCache) -> Result<Self> {
        if cache.n_rows() != self.dataset.n_rows() || cache.model_hash() != self.model.hash() {
            return Err(Error::invalid("cache was built for a different model or dataset"));
        }
        self.cache = Some(cache);
        Ok(self)
    }

    /// Same view with the cache switched off, so every call runs the encoder.
    pub fn uncached(self) -> Self {
        Self {
            cache: None,
            ..self
        }
    }

    fn cacheable(&self, feature: usize) -> Option<&'a BaseCache> {
        self.cache.filter(|_| !self.model.has_head(feature))
    }

    fn inputs(&self, row: usize, feature: usize) -> Vec<(usize, f64)> {
        self.dataset
            .row(row)
            .iter()
            .copied()
            .filter(|&(f, _)| f != feature && self.model.has_head(f))
            .collect()
    }

    /// Latent mean of `row` with `feature` removed from the encoder input.
    pub fn latent(&self, row: usize, feature: usize) -> Result<Cow<'a, [f64]>> {
        match self.cacheable(feature) {
            Some(c) => Ok(Cow::Borrowed(c.z(row))),
            None => Ok(Cow::Owned(self.model.latent_mean(&self.inputs(row, feature))?)),
        }
    }

    /// Trunk output of `row` with `feature` removed from the encoder input.
    pub fn trunk(&self, row: usize, feature: usize) -> Result<Cow<'a, [f64]>> {
        match self.cacheable(feature) {
            Some(c) => Ok(Cow::Borrowed(c.d(row))),
            None => {
                let z = self.model.latent_mean(&self.inputs(row, feature))?;
                Ok(Cow::Owned(self.model.trunk(&z)?))
            }
        }
    }

    /// Prediction for `feature` at `row` under `head`, in normalised units.
    pub fn predict(&self, head: &HeadParams, row: usize, feature: usize) -> Result<f64> {
        head.predict(&self.trunk(row, feature)?)
    }
}
