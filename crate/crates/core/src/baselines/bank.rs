use std::collections::BTreeMap;

use crate::data::{MetadataTable, SparseDataset};
use crate::error::{Error, Result};
use crate::numerics::{logit, xavier_init, Rng};
use crate::pvae::{HeadParams, Link, PvaeModel};

/// Bounds applied to a context mean before taking its logit.
pub const MEAN_CLAMP: f64 = 1e-6;

/// Xavier-initialised weights (`fan_in = d_dim`, `fan_out = 1`), zero bias.
pub fn random_head(d_dim: usize, link: Link, rng: &mut Rng) -> Result<HeadParams> {
    let w = xavier_init(d_dim, 1, rng)?;
    Ok(HeadParams {
        w: w.data().to_vec(),
        b: 0.0,
        link,
    })
}

/// Constant predictor of the context mean: `w = 0` and `b` the mean (identity
/// link) or its clamped logit (sigmoid link). An empty context falls back to
/// `fallback_mean`.
pub fn mean_impute_head(d_dim: usize, link: Link, context: &[f64], fallback_mean: f64) -> HeadParams {
    let mean = if context.is_empty() {
        fallback_mean
    } else {
        context.iter().sum::<f64>() / context.len() as f64
    };
    let b = match link {
        Link::Sigmoid => logit(mean.clamp(MEAN_CLAMP, 1.0 - MEAN_CLAMP)),
        Link::Identity => mean,
    };
    HeadParams {
        w: vec![0.0; d_dim],
        b,
        link,
    }
}

/// Trained heads of the base model's train features with their metadata
/// tags.
#[derive(Clone, Debug)]
pub struct HeadBank {
    heads: BTreeMap<usize, HeadParams>,
    tags: BTreeMap<usize, Vec<bool>>,
}

impl HeadBank {
    pub fn new(heads: BTreeMap<usize, HeadParams>, tags: BTreeMap<usize, Vec<bool>>) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::invalid("the head bank is empty"));
        }
        let d = heads.values().next().unwrap().d_dim();
        if heads.values().any(|h| h.d_dim() != d) {
            return Err(Error::invalid("bank heads differ in width"));
        }
        Ok(Self { heads, tags })
    }

    pub fn from_model(model: &PvaeModel, metadata: Option<&MetadataTable>) -> Result<Self> {
        let heads = model.params().heads.clone();
        let tags = match metadata {
            Some(m) => heads.keys().map(|&f| (f, m.get(f).tags.clone())).collect(),
            None => BTreeMap::new(),
        };
        Self::new(heads, tags)
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn d_dim(&self) -> usize {
        self.heads.values().next().map_or(0, HeadParams::d_dim)
    }

    pub fn features(&self) -> impl Iterator<Item = usize> + '_ {
        self.heads.keys().copied()
    }

    pub fn head(&self, feature: usize) -> Option<&HeadParams> {
        self.heads.get(&feature)
    }

    /// Element-wise mean over `features`, summed in ascending feature order.
    pub fn average(&self, features: &[usize], link: Link) -> Result<HeadParams> {
        let mut sorted = features.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() {
            return Err(Error::invalid("cannot average zero heads"));
        }
        let mut out = HeadParams::zeros(self.d_dim(), link);
        for f in &sorted {
            let h = self
                .heads
                .get(f)
                .ok_or_else(|| Error::invalid(format!("feature {f} is not in the bank")))?;
            crate::numerics::axpy(1.0, &h.w, &mut out.w);
            out.b += h.b;
        }
        let n = sorted.len() as f64;
        out.w.iter_mut().for_each(|v| *v /= n);
        out.b /= n;
        Ok(out)
    }
}

/// Mean of every head in the bank.
pub fn mean_head(bank: &HeadBank, link: Link) -> Result<HeadParams> {
    let all: Vec<usize> = bank.features().collect();
    bank.average(&all, link)
}

/// Mean over heads whose tag vector equals `tags`; falls back to
/// [`mean_head`] when nothing matches.
pub fn mean_head_matching(bank: &HeadBank, tags: &[bool], link: Link) -> Result<HeadParams> {
    let matching: Vec<usize> = bank
        .features()
        .filter(|f| bank.tags.get(f).is_some_and(|t| t.as_slice() == tags))
        .collect();
    if matching.is_empty() {
        mean_head(bank, link)
    } else {
        bank.average(&matching, link)
    }
}

/// Dense, column-mean-imputed copies of the bank features' columns.
#[derive(Clone, Debug)]
pub struct ImputedColumns {
    n_rows: usize,
    columns: BTreeMap<usize, Vec<f64>>,
}

impl ImputedColumns {
    /// Columns with no observations are filled with zeros.
    pub fn new(dataset: &SparseDataset, features: impl IntoIterator<Item = usize>) -> Self {
        let n_rows = dataset.n_rows();
        let columns = features
            .into_iter()
            .map(|f| (f, impute(n_rows, dataset.feature_observations(f), 0.0)))
            .collect();
        Self { n_rows, columns }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn column(&self, feature: usize) -> Option<&[f64]> {
        self.columns.get(&feature).map(Vec::as_slice)
    }
}

/// Column over `n_rows` holding the observations and their mean elsewhere
/// (`fallback` when there are none).
pub fn impute(n_rows: usize, observations: &[(usize, f64)], fallback: f64) -> Vec<f64> {
    let fill = if observations.is_empty() {
        fallback
    } else {
        observations.iter().map(|o| o.1).sum::<f64>() / observations.len() as f64
    };
    let mut col = vec![fill; n_rows];
    for &(r, v) in observations {
        col[r] = v;
    }
    col
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean head of the `k` bank features whose imputed columns lie closest to
/// the new feature's column (its context values, their mean elsewhere, or
/// `fallback_mean` for an empty context). Ties go to the lower feature index;
/// `k` beyond the bank size uses the whole bank.
pub fn knn_head(
    bank: &HeadBank,
    columns: &ImputedColumns,
    context: &[(usize, f64)],
    k: usize,
    fallback_mean: f64,
    link: Link,
) -> Result<HeadParams> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if let Some(&(r, _)) = context.iter().find(|(r, _)| *r >= columns.n_rows) {
        return Err(Error::invalid(format!("context row {r} out of range")));
    }
    let target = impute(columns.n_rows, context, fallback_mean);
    let mut scored = Vec::with_capacity(bank.len());
    for f in bank.features() {
        let col = columns
            .column(f)
            .ok_or_else(|| Error::invalid(format!("no imputed column for feature {f}")))?;
        scored.push((euclidean(col, &target), f));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest: Vec<usize> = scored.iter().take(k).map(|s| s.1).collect();
    bank.average(&nearest, link)
}
